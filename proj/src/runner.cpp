#include "photodp/runner.hpp"

#include "photodp/data.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace photodp {

namespace {

using nlohmann::json;

std::string fmt_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << text;
}

double calibrated_gamma_min(ActivationKind kind, double max_abs_z) {
    switch (kind) {
        case ActivationKind::Tanh: {
            const double t = std::tanh(max_abs_z);
            return 1.0 - t * t;
        }
        case ActivationKind::Sigmoid: {
            const double s = 1.0 / (1.0 + std::exp(-max_abs_z));
            return s * (1.0 - s);
        }
        case ActivationKind::Relu: return 0.0; // the derivative vanishes; accountant refuses
        case ActivationKind::Identity: return 1.0;
    }
    return 0.0;
}

struct AccountantInputs {
    std::vector<MechanismBounds> layers;
    std::vector<std::size_t> columns;
    std::vector<double> gamma_min_used;
};

// One MechanismBounds per layer. The clipped activation vector entering the
// outer product includes the constant bias input, so each layer contributes
// n_{l-1}+1 columns to the composition.
AccountantInputs accountant_inputs(const ExperimentConfig& cfg,
                                   const std::vector<double>* max_abs_z) {
    const auto& widths = cfg.network.widths;
    const std::size_t depth = widths.size() - 1;
    const double sigma_eff = cfg.train.per_pass_noise
                                 ? cfg.train.sigma * std::sqrt(2.0)
                                 : cfg.train.sigma;
    AccountantInputs in;
    for (std::size_t l = 0; l < depth; ++l) {
        const ActivationKind kind =
            (l + 1 == depth) ? ActivationKind::Identity : cfg.network.hidden;
        MechanismBounds b;
        b.m = cfg.train.batch_size;
        b.sigma = sigma_eff;
        b.n_l = widths[l + 1];
        b.gamma_max = cfg.privacy.gamma_max ? *cfg.privacy.gamma_max : gamma_max(kind);
        if (cfg.privacy.gamma_min) {
            b.gamma_min = *cfg.privacy.gamma_min;
        } else if (kind == ActivationKind::Identity) {
            b.gamma_min = 1.0;
        } else if (max_abs_z) {
            b.gamma_min = calibrated_gamma_min(kind, (*max_abs_z)[l]);
        } else {
            throw std::invalid_argument(
                "audit: gamma_min is not configured and no trained run is available for "
                "calibration; set [privacy] gamma_min or train first");
        }
        b.tau_h_min = cfg.train.clip.tau_h_min;
        b.tau_h_max = cfg.train.clip.tau_h_max;
        b.tau_b = cfg.train.clip.tau_b;
        in.layers.push_back(b);
        in.columns.push_back(widths[l] + 1);
        in.gamma_min_used.push_back(b.gamma_min);
    }
    return in;
}

PrivacyReport build_report(const ExperimentConfig& cfg, const AccountantInputs& in,
                           std::size_t steps, std::size_t epochs) {
    AuditOptions opts;
    opts.delta = cfg.privacy.delta;
    opts.alpha_grid = cfg.privacy.alpha_grid;
    opts.variant = cfg.privacy.variant;
    opts.composition = cfg.privacy.composition;
    opts.t_interpretation = cfg.privacy.t_interpretation;
    opts.magnitude_floor = cfg.train.clip.magnitude_floor;
    return audit_report(in.layers, in.columns, steps, epochs, opts);
}

std::string metrics_to_csv(const RunMetrics& m) {
    std::ostringstream os;
    os << "epoch,train_loss,val_acc,test_acc,align_l2_mean\n";
    for (std::size_t e = 0; e < m.train_loss.size(); ++e) {
        os << (e + 1) << ',' << fmt_g17(m.train_loss[e]) << ',' << fmt_g17(m.val_acc[e])
           << ',' << fmt_g17(m.test_acc[e]) << ',' << fmt_g17(m.align_l2_mean[e]) << '\n';
    }
    return os.str();
}

std::string align_to_csv(const RunMetrics& m) {
    std::ostringstream os;
    os << "step";
    for (std::size_t l = 0; l < m.align_steps.size(); ++l) os << ",align_l" << (l + 1);
    os << '\n';
    for (std::size_t k = 0; k < m.align_step_index.size(); ++k) {
        os << m.align_step_index[k];
        for (std::size_t l = 0; l < m.align_steps.size(); ++l) {
            os << ',' << fmt_g17(m.align_steps[l][k]);
        }
        os << '\n';
    }
    return os.str();
}

json report_to_json(const PrivacyReport& r) {
    auto num = [](double v) -> json {
        if (std::isinf(v)) return "undefined (divergence)";
        return v;
    };
    json j;
    j["alpha"] = r.alpha;
    j["sigma"] = r.sigma;
    j["delta"] = r.delta;
    j["eps_rdp_total"] = num(r.eps_rdp_total);
    j["eps_dp"] = num(r.eps_dp);
    j["variant"] = to_string(r.variant);
    j["no_guarantee"] = r.no_guarantee;
    j["eps_rdp_per_column"] = json::array();
    for (double e : r.eps_rdp_per_column) j["eps_rdp_per_column"].push_back(num(e));
    j["columns_per_layer"] = r.columns;
    j["steps"] = r.steps;
    j["epochs"] = r.epochs;
    j["interpretation_flags"] = {
        {"t_interpretation",
         r.t_interpretation == TInterpretation::Steps ? "steps" : "epochs"},
        {"composition", r.composition == Composition::PerLayer ? "per-layer" : "uniform"},
        {"magnitude_floor", r.magnitude_floor},
    };
    j["clipping_note"] = r.clipping_note;
    return j;
}

} // namespace

// RFC 1321 MD5, needed to verify the published dataset checksums.
std::string md5_hex(std::span<const std::uint8_t> bytes) {
    static constexpr std::uint32_t kShift[64] = {
        7, 12, 17, 22, 7, 12, 17, 22, 7, 12, 17, 22, 7, 12, 17, 22,
        5, 9,  14, 20, 5, 9,  14, 20, 5, 9,  14, 20, 5, 9,  14, 20,
        4, 11, 16, 23, 4, 11, 16, 23, 4, 11, 16, 23, 4, 11, 16, 23,
        6, 10, 15, 21, 6, 10, 15, 21, 6, 10, 15, 21, 6, 10, 15, 21};
    static constexpr std::uint32_t kSine[64] = {
        0xd76aa478, 0xe8c7b756, 0x242070db, 0xc1bdceee, 0xf57c0faf, 0x4787c62a,
        0xa8304613, 0xfd469501, 0x698098d8, 0x8b44f7af, 0xffff5bb1, 0x895cd7be,
        0x6b901122, 0xfd987193, 0xa679438e, 0x49b40821, 0xf61e2562, 0xc040b340,
        0x265e5a51, 0xe9b6c7aa, 0xd62f105d, 0x02441453, 0xd8a1e681, 0xe7d3fbc8,
        0x21e1cde6, 0xc33707d6, 0xf4d50d87, 0x455a14ed, 0xa9e3e905, 0xfcefa3f8,
        0x676f02d9, 0x8d2a4c8a, 0xfffa3942, 0x8771f681, 0x6d9d6122, 0xfde5380c,
        0xa4beea44, 0x4bdecfa9, 0xf6bb4b60, 0xbebfbc70, 0x289b7ec6, 0xeaa127fa,
        0xd4ef3085, 0x04881d05, 0xd9d4d039, 0xe6db99e5, 0x1fa27cf8, 0xc4ac5665,
        0xf4292244, 0x432aff97, 0xab9423a7, 0xfc93a039, 0x655b59c3, 0x8f0ccc92,
        0xffeff47d, 0x85845dd1, 0x6fa87e4f, 0xfe2ce6e0, 0xa3014314, 0x4e0811a1,
        0xf7537e82, 0xbd3af235, 0x2ad7d2bb, 0xeb86d391};

    std::vector<std::uint8_t> msg(bytes.begin(), bytes.end());
    const std::uint64_t bit_len = static_cast<std::uint64_t>(msg.size()) * 8;
    msg.push_back(0x80);
    while (msg.size() % 64 != 56) msg.push_back(0);
    for (int i = 0; i < 8; ++i) msg.push_back(static_cast<std::uint8_t>(bit_len >> (8 * i)));

    std::uint32_t a0 = 0x67452301, b0 = 0xefcdab89, c0 = 0x98badcfe, d0 = 0x10325476;
    for (std::size_t chunk = 0; chunk < msg.size(); chunk += 64) {
        std::uint32_t w[16];
        for (int i = 0; i < 16; ++i) {
            std::memcpy(&w[i], msg.data() + chunk + 4 * i, 4);
        }
        std::uint32_t a = a0, b = b0, c = c0, d = d0;
        for (int i = 0; i < 64; ++i) {
            std::uint32_t f, g;
            if (i < 16) {
                f = (b & c) | (~b & d);
                g = static_cast<std::uint32_t>(i);
            } else if (i < 32) {
                f = (d & b) | (~d & c);
                g = (5u * i + 1u) % 16u;
            } else if (i < 48) {
                f = b ^ c ^ d;
                g = (3u * i + 5u) % 16u;
            } else {
                f = c ^ (b | ~d);
                g = (7u * i) % 16u;
            }
            f += a + kSine[i] + w[g];
            a = d;
            d = c;
            c = b;
            b += (f << kShift[i]) | (f >> (32 - kShift[i]));
        }
        a0 += a;
        b0 += b;
        c0 += c;
        d0 += d;
    }
    char out[33];
    const std::uint32_t parts[4] = {a0, b0, c0, d0};
    for (int p = 0; p < 4; ++p) {
        for (int i = 0; i < 4; ++i) {
            std::snprintf(out + 8 * p + 2 * i, 3, "%02x",
                          (parts[p] >> (8 * i)) & 0xffu);
        }
    }
    return std::string(out, 32);
}

std::size_t steps_per_epoch_for(const ExperimentConfig& cfg) {
    const std::size_t total = 60000;
    const std::size_t n_val = static_cast<std::size_t>(
        std::llround(cfg.validation_fraction * static_cast<double>(total)));
    return (total - n_val) / cfg.train.batch_size;
}

RunOutcome run_train(const ExperimentConfig& cfg,
                     const std::filesystem::path& out_dir_override,
                     const StepObserver& observer) {
    cfg.validate();
    auto [full_train, test_set] = load_named_dataset(cfg.data_dir, cfg.dataset);
    if (full_train.images.cols() != cfg.network.widths.front()) {
        throw std::invalid_argument("run: network input width " +
                                    std::to_string(cfg.network.widths.front()) +
                                    " does not match dataset dimension " +
                                    std::to_string(full_train.images.cols()));
    }
    SplitSpec split_spec{cfg.validation_fraction, cfg.seed_data};
    auto [train_set, val_set] = split(full_train, split_spec);

    RunOutcome out;
    const std::filesystem::path dir = out_dir_override.empty()
                                          ? std::filesystem::path(cfg.out_dir) / cfg.name
                                          : out_dir_override;
    std::filesystem::create_directories(dir);
    out.paths.dir = dir;
    out.paths.metrics_csv = dir / "metrics.csv";
    out.paths.manifest = dir / "manifest.json";
    out.paths.checkpoint = dir / "checkpoint.bin";
    out.paths.checkpoint_meta = dir / "checkpoint.meta.json";
    out.paths.privacy_json = dir / "privacy.json";
    out.paths.privacy_txt = dir / "privacy.txt";
    out.paths.align_csv = dir / "align.csv";

    TrainResult result = train(cfg.train, cfg.network, train_set, &val_set, &test_set,
                               observer);
    out.metrics = std::move(result.metrics);

    // Accountant, with gamma_min calibrated from the observed pre-activations
    // unless the config pinned it.
    try {
        const AccountantInputs in = accountant_inputs(cfg, &out.metrics.max_abs_z);
        out.gamma_min_used = in.gamma_min_used;
        out.privacy = build_report(cfg, in, out.metrics.total_steps, cfg.train.epochs);
        out.privacy_ok = true;
    } catch (const std::exception& e) {
        out.privacy_ok = false;
        out.privacy_error = e.what();
    }
    if (!cfg.train.private_mechanism) {
        out.privacy_ok = false;
        out.privacy_error =
            "no DP guarantee: the clipping/noise mechanism was disabled for this run";
    }

    write_text(out.paths.metrics_csv, metrics_to_csv(out.metrics));
    if (cfg.train.align_probe) write_text(out.paths.align_csv, align_to_csv(out.metrics));
    save_weights(result.net, out.paths.checkpoint);

    json meta;
    meta["format"] = "photodp-checkpoint-meta/1";
    char hash_hex[19];
    std::snprintf(hash_hex, sizeof(hash_hex), "0x%016llx",
                  static_cast<unsigned long long>(config_hash(cfg)));
    meta["config_hash"] = hash_hex;
    meta["seeds"] = {{"data", cfg.seed_data},
                     {"init", cfg.train.seed_init},
                     {"shuffle", cfg.train.seed_shuffle},
                     {"noise", cfg.train.seed_noise},
                     {"feedback", cfg.train.seed_feedback}};
    meta["widths"] = cfg.network.widths;
    meta["activation"] = to_string(cfg.network.hidden);
    write_text(out.paths.checkpoint_meta, meta.dump(2));

    json manifest;
    manifest["format"] = "photodp-run-manifest/1";
    manifest["config"] = json::parse(config_to_json(cfg));
    manifest["config_hash"] = hash_hex;
    manifest["algorithm_label"] = to_string(cfg.train.algorithm);
    manifest["steps_per_epoch"] = out.metrics.steps_per_epoch;
    manifest["total_steps"] = out.metrics.total_steps;
    manifest["max_abs_z"] = out.metrics.max_abs_z;
    manifest["gamma_min_calibrated"] = out.gamma_min_used;
    manifest["final_val_acc"] = out.metrics.final_val_acc;
    manifest["final_test_acc"] = out.metrics.final_test_acc;
    if (out.privacy_ok) {
        manifest["privacy"] = report_to_json(out.privacy);
    } else {
        manifest["privacy"] = {{"error", out.privacy_error}};
    }
    write_text(out.paths.manifest, manifest.dump(2));

    if (out.privacy_ok) {
        write_text(out.paths.privacy_json, report_to_json(out.privacy).dump(2));
        write_text(out.paths.privacy_txt, render_report(out.privacy));
    } else {
        write_text(out.paths.privacy_json, json{{"error", out.privacy_error}}.dump(2));
        write_text(out.paths.privacy_txt, "privacy report unavailable: " +
                                              out.privacy_error + "\n");
    }
    return out;
}

PrivacyReport run_audit(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::size_t per_epoch = steps_per_epoch_for(cfg);
    const AccountantInputs in = accountant_inputs(cfg, nullptr);
    return build_report(cfg, in, per_epoch * cfg.train.epochs, cfg.train.epochs);
}

std::string privacy_report_json(const PrivacyReport& report) {
    return report_to_json(report).dump(2);
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& base,
                                const std::vector<double>& sigmas,
                                const std::filesystem::path& out_dir) {
    if (sigmas.empty()) throw std::invalid_argument("sweep: empty sigma list");
    std::vector<SweepRow> rows;
    for (double sigma : sigmas) {
        ExperimentConfig cfg = base;
        cfg.train.sigma = sigma;
        std::ostringstream label;
        label << base.name << "-sigma" << sigma;
        cfg.name = label.str();
        SweepRow row;
        row.sigma = sigma;
        try {
            const RunOutcome outcome = run_train(cfg, out_dir / cfg.name);
            row.ok = true;
            row.final_test_acc = outcome.metrics.final_test_acc;
            row.final_val_acc = outcome.metrics.final_val_acc;
            row.run_dir = (out_dir / cfg.name).string();
        } catch (const std::exception& e) {
            row.ok = false;
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
    std::ostringstream os;
    os << "sigma,final_test_acc,final_val_acc,run_dir,status\n";
    for (const SweepRow& r : rows) {
        os << fmt_g17(r.sigma) << ',' << fmt_g17(r.final_test_acc) << ','
           << fmt_g17(r.final_val_acc) << ',' << r.run_dir << ','
           << (r.ok ? "ok" : ("error: " + r.error)) << '\n';
    }
    write_text(path, os.str());
}

ExperimentConfig config_from_manifest_file(const std::filesystem::path& manifest) {
    std::ifstream is(manifest);
    if (!is) throw std::invalid_argument("cannot open manifest " + manifest.string());
    std::stringstream ss;
    ss << is.rdbuf();
    const json j = json::parse(ss.str());
    if (!j.contains("config")) {
        throw std::invalid_argument("manifest " + manifest.string() + " has no config object");
    }
    return config_from_json(j.at("config").dump());
}

} // namespace photodp
