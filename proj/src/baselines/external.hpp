#pragma once

#include <string>

#include "data/cohort.hpp"
#include "data/csv.hpp"
#include "metrics/report.hpp"

namespace clinbench::baselines {

/// Scores computed outside this tool (e.g. tree ensembles), as CSV with
/// columns record_id, score and optionally risk_os, risk_pfs. Missing risk
/// columns default to 1 - score. Every cohort record must be scored.
metrics::Predictions external_predictions(const data::RawTable& table, const data::Cohort& cohort);
metrics::Predictions load_external_scores(const std::string& path, const data::Cohort& cohort);

}  // namespace clinbench::baselines
