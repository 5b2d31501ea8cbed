#pragma once

#include <json.hpp>

#include "dmlkit/metrics.hpp"
#include "dmlkit/splits.hpp"
#include "dmlkit/trainer.hpp"

namespace dml {

// JSON views with the stable key names used by the CLI and file formats:
// recall@{k}, map@{c}, nmi, pi_intra, pi_inter, pi_ratio, spectral_decay.

nlohmann::json to_json(const metrics::RetrievalReport& report);
nlohmann::json to_json(const metrics::DensityResult& density);

nlohmann::json manifest_to_json(const splits::SplitSequence& sequence);
splits::SplitSequence manifest_from_json(const nlohmann::json& j);

nlohmann::json history_to_json(const train::EpochRecord& record);
nlohmann::json to_json(const train::GradCheckReport& report);
nlohmann::json to_json(const train::FewShotReport& report);

}  // namespace dml
