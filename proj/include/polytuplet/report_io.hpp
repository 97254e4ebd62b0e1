#pragma once

#include <string>

#include "json.hpp"
#include "polytuplet/training.hpp"

namespace polytuplet {

// Flat key set shared by config files and CLI flags (e.g. "margin", "dropout", "lr").
nlohmann::json config_to_json(const TrainConfig& cfg);

// Overlays every key present in `overlay` onto `cfg`. Unknown keys or wrong
// types throw ConfigError.
void apply_config_json(const nlohmann::json& overlay, TrainConfig& cfg);

nlohmann::json epoch_to_json(const EpochStats& stats);

// Deterministic summary (no wall-clock time).
nlohmann::json summary_to_json(const TrainReport& report, const TrainConfig& cfg);

// One JSON object per epoch, newline-terminated.
std::string report_to_jsonl(const TrainReport& report);

}  // namespace polytuplet
