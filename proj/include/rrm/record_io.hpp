#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "rrm/trainer.hpp"

namespace rrm {

/// Version string baked in at configure time (git describe when available).
std::string version_string();

/// One row per iteration; histogram counts appear as hist_contaminated_<b> and
/// hist_clean_<b> for b = 0..5. NaN is written as "nan".
void write_record_csv(const RunRecord& record, const std::string& path);

/// Reads back the iteration rows of write_record_csv. Run-level fields that
/// live only in the summary are left at their defaults.
std::vector<IterationRecord> read_record_csv(const std::string& path);

/// Long-form weight evolution: iteration,population,bucket,count, with
/// iterations x 6 buckets x 2 populations rows.
void write_weight_evolution_csv(const std::vector<IterationRecord>& iterations,
                                const std::string& path);

nlohmann::json to_json(const TrainConfig& config);
nlohmann::json to_json(const RunRecord& record);

/// Writes `doc` pretty-printed, throwing IoError on failure.
void write_json(const nlohmann::json& doc, const std::string& path);
nlohmann::json read_json(const std::string& path);

}  // namespace rrm
