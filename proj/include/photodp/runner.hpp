#pragma once

#include "photodp/config.hpp"
#include "photodp/privacy.hpp"
#include "photodp/training.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace photodp {

struct RunPaths {
    std::filesystem::path dir;
    std::filesystem::path metrics_csv;
    std::filesystem::path manifest;
    std::filesystem::path checkpoint;
    std::filesystem::path checkpoint_meta;
    std::filesystem::path privacy_json;
    std::filesystem::path privacy_txt;
    std::filesystem::path align_csv;
};

struct RunOutcome {
    RunMetrics metrics;
    PrivacyReport privacy;
    bool privacy_ok = false;
    std::string privacy_error;
    std::vector<double> gamma_min_used; // per layer, calibrated or overridden
    RunPaths paths;
};

/// MD5 digest as lowercase hex (dataset files ship with published MD5s).
std::string md5_hex(std::span<const std::uint8_t> bytes);

/// Per-epoch update-step count implied by the config's dataset conventions
/// (both supported datasets carry 60000 training images before the split).
std::size_t steps_per_epoch_for(const ExperimentConfig& cfg);

/// Train per config and write the run directory: metrics CSV, manifest
/// JSON, weight checkpoint plus sidecar, privacy report, and the alignment
/// series when probing was on. out_dir_override replaces
/// cfg.out_dir/cfg.name.
RunOutcome run_train(const ExperimentConfig& cfg,
                     const std::filesystem::path& out_dir_override = {},
                     const StepObserver& observer = {});

/// Accountant without training. gamma_min must come from the config (or be
/// implied by the activation); errors explain which precondition failed.
PrivacyReport run_audit(const ExperimentConfig& cfg);

/// Render the report as the documented JSON schema.
std::string privacy_report_json(const PrivacyReport& report);

struct SweepRow {
    double sigma = 0.0;
    bool ok = false;
    double final_test_acc = 0.0;
    double final_val_acc = 0.0;
    std::string run_dir;
    std::string error;
};

/// One training run per sigma with shared seeds; completed rows survive a
/// partial failure (the caller decides the exit code).
std::vector<SweepRow> run_sweep(const ExperimentConfig& base,
                                const std::vector<double>& sigmas,
                                const std::filesystem::path& out_dir);

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);

/// Reload the exact configuration of a previous run from its manifest.
ExperimentConfig config_from_manifest_file(const std::filesystem::path& manifest);

} // namespace photodp
