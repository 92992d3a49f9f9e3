#include "psc/serialize.hpp"

#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "psc/errors.hpp"

namespace psc {

using nlohmann::json;

namespace {

json ranking_to_array(const Ranking& ranking) {
    return json(ranking.to_one_based());
}

Ranking ranking_from_array(const json& array, std::size_t line_no = 0) {
    if (!array.is_array() || array.empty()) {
        throw ParseError("a ranking must be a non-empty JSON array", line_no);
    }
    std::vector<std::int64_t> values;
    values.reserve(array.size());
    for (const json& v : array) {
        if (!v.is_number_integer()) {
            throw ParseError("ranking entries must be integers", line_no);
        }
        values.push_back(v.get<std::int64_t>());
    }
    try {
        return Ranking::from_one_based(values);
    } catch (const Error& e) {
        throw ParseError(e.what(), line_no);
    }
}

} // namespace

std::string to_json(const Ranking& ranking) {
    return ranking_to_array(ranking).dump();
}

Ranking ranking_from_json(const std::string& text) {
    json parsed;
    try {
        parsed = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad ranking JSON: ") + e.what());
    }
    return ranking_from_array(parsed);
}

std::string to_json(const AggregationResult& result) {
    json out = {{"ranking", ranking_to_array(result.ranking)},
                {"objective", result.objective},
                {"exact", result.exact},
                {"method", to_string(result.method)}};
    return out.dump();
}

std::string to_json(const RankingSample& sample) {
    json out = {{"index", sample.index},
                {"shuffle", ranking_to_array(sample.shuffle)},
                {"raw_output", ranking_to_array(sample.raw_output)},
                {"canonical", ranking_to_array(sample.canonical)}};
    return out.dump();
}

RankingSample ranking_sample_from_json(const std::string& text, std::size_t line_no) {
    json parsed;
    try {
        parsed = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad trace record: ") + e.what(), line_no);
    }
    if (!parsed.is_object() || !parsed.contains("shuffle") || !parsed.contains("raw_output")) {
        throw ParseError("trace record needs 'shuffle' and 'raw_output' arrays", line_no);
    }
    RankingSample sample;
    sample.index = parsed.value("index", 0);
    sample.shuffle = ranking_from_array(parsed["shuffle"], line_no);
    sample.raw_output = ranking_from_array(parsed["raw_output"], line_no);
    if (sample.shuffle.size() != sample.raw_output.size()) {
        throw ParseError("trace record mixes ranking sizes", line_no);
    }
    if (parsed.contains("canonical")) {
        sample.canonical = ranking_from_array(parsed["canonical"], line_no);
        if (sample.canonical != compose(sample.shuffle, sample.raw_output)) {
            throw ParseError("trace record canonical does not match shuffle o raw_output",
                             line_no);
        }
    } else {
        sample.canonical = compose(sample.shuffle, sample.raw_output);
    }
    return sample;
}

std::vector<Ranking> read_rankings_jsonl(std::istream& in) {
    std::vector<Ranking> rankings;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        json parsed;
        try {
            parsed = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(std::string("bad ranking line: ") + e.what(), line_no);
        }
        rankings.push_back(ranking_from_array(parsed, line_no));
    }
    return rankings;
}

void write_rankings_jsonl(std::ostream& out, const std::vector<Ranking>& rankings) {
    for (const Ranking& r : rankings) {
        out << to_json(r) << '\n';
    }
}

std::vector<RankingSample> read_trace_jsonl(std::istream& in) {
    std::vector<RankingSample> samples;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        samples.push_back(ranking_sample_from_json(line, line_no));
    }
    return samples;
}

std::string to_json(const ConvergenceReport& report) {
    json points = json::array();
    for (std::size_t i = 0; i < report.m_grid.size(); ++i) {
        points.push_back({{"m", report.m_grid[i]},
                          {"recovery_rate", report.recovery_rate[i]},
                          {"mean_tau", report.mean_tau[i]}});
    }
    json out = {{"trials", report.trials}, {"points", std::move(points)}};
    return out.dump();
}

std::string to_json(const ReversionMatrix& matrix, const UniformityReport* uniformity) {
    const std::int32_t n = matrix.size();
    json cells = json::array();
    for (std::int32_t i = 1; i <= n; ++i) {
        for (std::int32_t j = i + 1; j <= n; ++j) {
            json cell = {{"i", i},
                         {"j", j},
                         {"count", matrix.count(i, j)},
                         {"opportunities", matrix.opportunities(i, j)}};
            if (const auto r = matrix.rate(i, j)) {
                cell["rate"] = *r;
            }
            if (const auto v = matrix.normalized(i, j)) {
                cell["normalized"] = *v;
            }
            cells.push_back(std::move(cell));
        }
    }
    json out = {{"n", n}, {"cells", std::move(cells)}};
    if (uniformity != nullptr) {
        out["uniformity"] = {{"statistic", uniformity->statistic},
                             {"p_value", uniformity->p_value},
                             {"dof", uniformity->dof},
                             {"pooled_cells", uniformity->pooled_cells},
                             {"pooled_rate", uniformity->pooled_rate}};
    }
    return out.dump();
}

} // namespace psc
