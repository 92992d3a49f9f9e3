#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace psc {

struct TrecRunEntry {
    std::string doc_id;
    double score = 0.0;
};

/// Per-query ordered result lists. Emitted runs must have strictly
/// decreasing scores; rank fields are regenerated (1-based, contiguous)
/// on write.
struct TrecRun {
    std::string tag = "psc";
    std::map<std::string, std::vector<TrecRunEntry>> queries;
};

/// Graded relevance judgments: query -> doc -> relevance.
struct Qrels {
    std::map<std::string, std::map<std::string, int>> queries;
};

/// Lines "qid Q0 docid rank score tag", whitespace-separated.
TrecRun read_trec_run(std::istream& in);
void write_trec_run(std::ostream& out, const TrecRun& run);

/// Lines "qid 0 docid rel".
Qrels read_qrels(std::istream& in);

struct NdcgReport {
    std::map<std::string, double> per_query;
    double mean = 0.0;
    std::vector<std::string> flagged;  // no relevant docs, or missing from the run
};

/// Graded nDCG with gain 2^rel - 1 and log2(rank + 1) discount. Every qrels
/// query is scored; queries with no relevant documents or absent from the
/// run contribute 0 and are flagged.
NdcgReport ndcg_at_k(const TrecRun& run, const Qrels& qrels, int k = 10);

} // namespace psc
