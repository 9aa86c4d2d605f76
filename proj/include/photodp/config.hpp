#pragma once

#include "photodp/privacy.hpp"
#include "photodp/training.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace photodp {

/// Accountant-facing knobs resolved from the [privacy] config section.
struct PrivacyConfig {
    double delta = 1e-5;
    std::vector<double> alpha_grid = {1.25, 1.5, 2.0, 3.0, 4.0, 8.0, 16.0, 32.0, 64.0};
    BoundVariant variant = BoundVariant::Main;
    Composition composition = Composition::PerLayer;
    TInterpretation t_interpretation = TInterpretation::Steps;
    /// Optional overrides; when absent gamma_min is calibrated from the
    /// largest pre-activation magnitude observed during the run.
    std::optional<double> gamma_min;
    std::optional<double> gamma_max;
};

/// Full experiment description: everything a run needs, resolved and
/// explicit (no wall-clock seed defaults anywhere).
struct ExperimentConfig {
    std::string name = "run";
    std::string dataset = "fashion-mnist"; // fashion-mnist | mnist
    std::string data_dir = "data";
    std::string out_dir = "runs";
    NetworkSpec network{{784, 512, 512, 10}, ActivationKind::Tanh};
    TrainConfig train;
    double validation_fraction = 0.10;
    std::uint64_t seed_data = 101; // validation split
    PrivacyConfig privacy;
    std::optional<double> target_accuracy; // percent, for --strict runs

    void validate() const;
};

/// Parse the sectioned key=value config format. Unknown sections or keys
/// are hard errors with a line diagnostic; silent typos in privacy
/// parameters are not acceptable.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::filesystem::path& path);

/// JSON round trip used by run manifests; from_manifest_json accepts the
/// manifest's "config" object.
std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const std::string& json_text);

/// FNV-1a over the canonical JSON form; identifies a run configuration.
std::uint64_t config_hash(const ExperimentConfig& cfg);

} // namespace photodp
