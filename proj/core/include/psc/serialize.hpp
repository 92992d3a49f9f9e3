#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "psc/aggregation.hpp"
#include "psc/bias.hpp"
#include "psc/noise.hpp"
#include "psc/pipeline.hpp"
#include "psc/ranking.hpp"

namespace psc {

// Rankings travel as JSON arrays of 1-based integers, e.g. [3,1,2].

std::string to_json(const Ranking& ranking);
Ranking ranking_from_json(const std::string& text);

/// {"ranking": [...], "objective": N, "exact": bool, "method": "..."}
std::string to_json(const AggregationResult& result);

/// {"index": i, "shuffle": [...], "raw_output": [...], "canonical": [...]}
std::string to_json(const RankingSample& sample);
RankingSample ranking_sample_from_json(const std::string& text, std::size_t line_no = 0);

/// Sample sets: JSONL, one JSON ranking array per line.
std::vector<Ranking> read_rankings_jsonl(std::istream& in);
void write_rankings_jsonl(std::ostream& out, const std::vector<Ranking>& rankings);

/// Trace files: JSONL, one RankingSample object per line. Lines may carry
/// extra fields (task ids, window indices); they are ignored on read.
std::vector<RankingSample> read_trace_jsonl(std::istream& in);

std::string to_json(const ConvergenceReport& report);
std::string to_json(const ReversionMatrix& matrix, const UniformityReport* uniformity = nullptr);

} // namespace psc
