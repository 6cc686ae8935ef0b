#include <fstream>

#include "contcomm/gateway.hpp"

namespace nlohmann {

// Durations travel as integer milliseconds.
template <>
struct adl_serializer<contcomm::Millis> {
  static void to_json(json& j, const contcomm::Millis& d) { j = d.count(); }
  static void from_json(const json& j, contcomm::Millis& d) { d = contcomm::Millis{j.get<std::int64_t>()}; }
};

}  // namespace nlohmann

namespace contcomm::gateway {

using nlohmann::json;

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PipelineConfig, k, eps_c, eps_l_km, min_pts, batch_interval, max_batch,
                                                retrain_interval, retrain_in_background, liveness_interval,
                                                pin_retention, relink_window, window, topic_seed, veracity_seed,
                                                olda_passes, olda_batch, max_features, min_train_docs, dictionary,
                                                gazetteer, stopwords, veracity_training, veracity_model,
                                                remote_classifier, remote_timeout, remote_mark_unchecked, source,
                                                source_seed, source_count, source_rate, dead_letter, broker_log_dir,
                                                store_shards, store_precision, store_replicas, host, port,
                                                subscriber_queue, gray_pins)

void PipelineConfig::validate() const {
  auto bad = [](const std::string& field, const std::string& why) {
    throw Error(ErrorCode::InvalidArgument, "config " + field + ": " + why);
  };
  if (k == 0) bad("k", "must be positive");
  if (!(eps_c > 0.0 && eps_c <= 1.0)) bad("eps_c", "must lie in (0, 1]");
  if (!(eps_l_km > 0.0)) bad("eps_l_km", "must be positive");
  if (min_pts == 0) bad("min_pts", "must be positive");
  if (batch_interval < Millis{0}) bad("batch_interval", "must not be negative");
  if (max_batch == 0) bad("max_batch", "must be positive");
  if (retrain_interval <= Millis{0}) bad("retrain_interval", "must be positive");
  if (liveness_interval <= Millis{0}) bad("liveness_interval", "must be positive");
  if (pin_retention <= Millis{0}) bad("pin_retention", "must be positive");
  if (relink_window <= Millis{0}) bad("relink_window", "must be positive");
  if (window <= Millis{0}) bad("window", "must be positive");
  if (olda_passes == 0) bad("olda_passes", "must be positive");
  if (olda_batch == 0) bad("olda_batch", "must be positive");
  if (remote_timeout <= Millis{0}) bad("remote_timeout", "must be positive");
  if (source_rate < 0) bad("source_rate", "must not be negative");
  if (store_shards == 0) bad("store_shards", "must be positive");
  if (store_precision < 1 || store_precision > 12) bad("store_precision", "must lie in [1, 12]");
  if (store_replicas == 0) bad("store_replicas", "must be positive");
  if (port < 0 || port > 65535) bad("port", "out of range");
  if (subscriber_queue == 0) bad("subscriber_queue", "must be positive");
}

PipelineConfig config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "config must be a JSON object");
  const json known = PipelineConfig{};
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw Error(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
  PipelineConfig c;
  try {
    c = j.get<PipelineConfig>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

json to_json(const PipelineConfig& c) { return json(c); }

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path.string());
  auto j = json::parse(in, nullptr, false, true);
  if (j.is_discarded()) throw Error(ErrorCode::InvalidArgument, "config " + path.string() + " is not valid JSON");
  auto c = config_from_json(j);
  // Relative data paths are taken from the config file's directory.
  const auto base = path.parent_path();
  for (auto* p : {&c.dictionary, &c.gazetteer, &c.stopwords, &c.veracity_training, &c.veracity_model, &c.source,
                  &c.dead_letter, &c.broker_log_dir}) {
    if (p->empty() || *p == "synthetic" || std::filesystem::path(*p).is_absolute()) continue;
    *p = (base / *p).lexically_normal().string();
  }
  return c;
}

}  // namespace contcomm::gateway
