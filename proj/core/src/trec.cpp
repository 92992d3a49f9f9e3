#include "psc/trec.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "psc/errors.hpp"

namespace psc {

namespace {

std::vector<std::string> fields(const std::string& line) {
    std::istringstream stream(line);
    std::vector<std::string> out;
    std::string field;
    while (stream >> field) {
        out.push_back(field);
    }
    return out;
}

double dcg(const std::vector<int>& gains, int k) {
    double total = 0.0;
    const int limit = std::min<int>(k, static_cast<int>(gains.size()));
    for (int r = 1; r <= limit; ++r) {
        const double gain = std::pow(2.0, gains[static_cast<std::size_t>(r - 1)]) - 1.0;
        total += gain / std::log2(static_cast<double>(r) + 1.0);
    }
    return total;
}

} // namespace

TrecRun read_trec_run(std::istream& in) {
    TrecRun run;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const std::vector<std::string> f = fields(line);
        if (f.size() != 6) {
            throw ParseError("run line needs 6 fields 'qid Q0 docid rank score tag', got " +
                             std::to_string(f.size()), line_no);
        }
        double score = 0.0;
        try {
            score = std::stod(f[4]);
        } catch (const std::exception&) {
            throw ParseError("run line has a non-numeric score: " + f[4], line_no);
        }
        run.queries[f[0]].push_back(TrecRunEntry{f[2], score});
        run.tag = f[5];
    }
    return run;
}

void write_trec_run(std::ostream& out, const TrecRun& run) {
    char buf[64];
    for (const auto& [qid, entries] : run.queries) {
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (i > 0 && !(entries[i].score < entries[i - 1].score)) {
                throw ValidationError("run scores must strictly decrease with rank (query " +
                                      qid + ")");
            }
            std::snprintf(buf, sizeof(buf), "%g", entries[i].score);
            out << qid << " Q0 " << entries[i].doc_id << ' ' << (i + 1) << ' ' << buf << ' '
                << run.tag << '\n';
        }
    }
}

Qrels read_qrels(std::istream& in) {
    Qrels qrels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const std::vector<std::string> f = fields(line);
        if (f.size() != 4) {
            throw ParseError("qrels line needs 4 fields 'qid 0 docid rel', got " +
                             std::to_string(f.size()), line_no);
        }
        int rel = 0;
        try {
            rel = std::stoi(f[3]);
        } catch (const std::exception&) {
            throw ParseError("qrels line has a non-integer relevance: " + f[3], line_no);
        }
        qrels.queries[f[0]][f[2]] = rel;
    }
    return qrels;
}

NdcgReport ndcg_at_k(const TrecRun& run, const Qrels& qrels, int k) {
    if (k < 1) {
        throw ValidationError("ndcg cutoff must be >= 1");
    }
    NdcgReport report;
    double total = 0.0;
    for (const auto& [qid, judgments] : qrels.queries) {
        // Ideal gains: judged relevances sorted descending.
        std::vector<int> ideal;
        ideal.reserve(judgments.size());
        for (const auto& [doc, rel] : judgments) {
            ideal.push_back(rel);
        }
        std::sort(ideal.begin(), ideal.end(), std::greater<>());
        const double idcg = dcg(ideal, k);

        const auto run_it = run.queries.find(qid);
        if (idcg <= 0.0 || run_it == run.queries.end()) {
            report.per_query[qid] = 0.0;
            report.flagged.push_back(qid);
            continue;
        }

        std::vector<int> gains;
        gains.reserve(run_it->second.size());
        for (const TrecRunEntry& entry : run_it->second) {
            const auto it = judgments.find(entry.doc_id);
            gains.push_back(it == judgments.end() ? 0 : it->second);
        }
        report.per_query[qid] = dcg(gains, k) / idcg;
    }
    for (const auto& [qid, score] : report.per_query) {
        total += score;
    }
    report.mean = report.per_query.empty() ? 0.0 : total / static_cast<double>(report.per_query.size());
    return report;
}

} // namespace psc
