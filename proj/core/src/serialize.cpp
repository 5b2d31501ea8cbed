#include "dmlkit/serialize.hpp"

namespace dml {

using nlohmann::json;

json to_json(const metrics::RetrievalReport& report) {
  json j = json::object();
  for (const auto& [k, v] : report.recall_at) j["recall@" + std::to_string(k)] = v;
  for (const auto& [c, v] : report.map_at) j["map@" + std::to_string(c)] = v;
  return j;
}

json to_json(const metrics::DensityResult& density) {
  return json{{"pi_intra", density.pi_intra},
              {"pi_inter", density.pi_inter},
              {"pi_ratio", density.pi_ratio}};
}

json manifest_to_json(const splits::SplitSequence& sequence) {
  json states = json::array();
  for (const auto& state : sequence.states) {
    states.push_back(json{{"step", state.step},
                          {"kind", splits::step_kind_name(state.kind)},
                          {"train_classes", state.train_classes},
                          {"test_classes", state.test_classes},
                          {"fid", state.fid}});
  }
  return json{{"swap_size", sequence.swap_size},
              {"retained_fraction_floor", sequence.retained_fraction_floor},
              {"states", states}};
}

splits::SplitSequence manifest_from_json(const json& j) {
  splits::SplitSequence sequence;
  sequence.swap_size = j.at("swap_size").get<int>();
  sequence.retained_fraction_floor = j.at("retained_fraction_floor").get<double>();
  for (const auto& s : j.at("states")) {
    splits::SplitState state;
    state.step = s.at("step").get<int>();
    state.kind = splits::step_kind_from_name(s.at("kind").get<std::string>());
    state.train_classes = s.at("train_classes").get<std::vector<std::uint32_t>>();
    state.test_classes = s.at("test_classes").get<std::vector<std::uint32_t>>();
    state.fid = s.at("fid").get<double>();
    sequence.states.push_back(std::move(state));
  }
  return sequence;
}

json history_to_json(const train::EpochRecord& record) {
  json j{{"epoch", record.epoch}, {"loss", record.loss}};
  if (record.distill != 0.0) j["distill"] = record.distill;
  if (record.evaluated) {
    j["recall@1"] = record.recall1;
    j["map@1000"] = record.map1000;
    j["nmi"] = record.nmi;
    j["pi_ratio"] = record.pi_ratio;
    j["spectral_decay"] = record.spectral_decay;
  }
  return j;
}

json to_json(const train::GradCheckReport& report) {
  json blocks = json::array();
  for (const auto& block : report.blocks) {
    blocks.push_back(json{{"objective", block.objective},
                          {"block", block.block},
                          {"max_rel_error", block.max_rel_error}});
  }
  return json{{"blocks", blocks}, {"worst", report.worst}};
}

json to_json(const train::FewShotReport& report) {
  json episodes_zero = json::array();
  json episodes_adapted = json::array();
  for (const auto& r : report.zero_shot_episodes) episodes_zero.push_back(to_json(r));
  for (const auto& r : report.adapted_episodes) episodes_adapted.push_back(to_json(r));
  return json{{"zero_shot", to_json(report.zero_shot)},
              {"adapted", to_json(report.adapted)},
              {"zero_shot_episodes", episodes_zero},
              {"adapted_episodes", episodes_adapted}};
}

}  // namespace dml
