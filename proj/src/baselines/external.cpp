#include "baselines/external.hpp"

#include <cmath>
#include <map>

#include "common/error.hpp"

namespace clinbench::baselines {

metrics::Predictions external_predictions(const data::RawTable& table, const data::Cohort& cohort) {
  const std::size_t id_col = table.require_column("record_id");
  const std::size_t score_col = table.require_column("score");
  const auto os_col = table.column("risk_os");
  const auto pfs_col = table.column("risk_pfs");

  struct Row {
    double score, os, pfs;
  };
  std::map<std::string, Row> by_id;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& cells = table.rows[r];
    auto number = [&](std::size_t c, const char* what) {
      const auto v = data::parse_number(cells[c]);
      require(v && std::isfinite(*v), ErrorKind::Parse,
              std::string("external scores row ") + std::to_string(r + 1) + ": bad " + what + " '" + cells[c] + "'");
      return *v;
    };
    Row row;
    row.score = number(score_col, "score");
    row.os = os_col ? number(*os_col, "risk_os") : 1.0 - row.score;
    row.pfs = pfs_col ? number(*pfs_col, "risk_pfs") : 1.0 - row.score;
    require(by_id.emplace(cells[id_col], row).second, ErrorKind::Validation,
            "external scores list record '" + cells[id_col] + "' twice");
  }
  metrics::Predictions p;
  for (const auto& rec : cohort.records()) {
    const auto it = by_id.find(rec.id);
    require(it != by_id.end(), ErrorKind::Validation, "external scores have no entry for record '" + rec.id + "'");
    p.responder_prob.push_back(it->second.score);
    p.risk_os.push_back(it->second.os);
    p.risk_pfs.push_back(it->second.pfs);
  }
  return p;
}

metrics::Predictions load_external_scores(const std::string& path, const data::Cohort& cohort) {
  return external_predictions(data::read_csv(path), cohort);
}

}  // namespace clinbench::baselines
