// photodp: train fully-connected networks with noisy optical random
// projections and account for the resulting differential privacy.
//
// Subcommands: fetch-data, train, sweep, audit, align.
// Exit codes: 0 success, 1 config error, 2 runtime error, 3 target miss
// in --strict mode.

#include "photodp/data.hpp"
#include "photodp/runner.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <httplib.h>

namespace {

using namespace photodp;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitTargetMiss = 3;

struct DatasetFile {
    const char* name;
    std::size_t bytes;
    const char* md5;
};

struct DatasetSource {
    const char* name;
    const char* base_url;
    DatasetFile files[4];
};

// Published sizes and MD5 digests of the canonical gzip'd IDX files.
constexpr DatasetSource kSources[] = {
    {"fashion-mnist",
     "http://fashion-mnist.s3-website.eu-central-1.amazonaws.com",
     {{"train-images-idx3-ubyte.gz", 26421880, "8d4fb7e6c68d591d4c3dfef9ec88bf0d"},
      {"train-labels-idx1-ubyte.gz", 29515, "25c81989df183df01b3e8a0aad5dffbe"},
      {"t10k-images-idx3-ubyte.gz", 4422102, "bef4ecab320f06d8554ea6380940ec79"},
      {"t10k-labels-idx1-ubyte.gz", 5148, "bb300cfdad3c16e7a12a480ee83cd310"}}},
    {"mnist",
     "https://ossci-datasets.s3.amazonaws.com/mnist",
     {{"train-images-idx3-ubyte.gz", 9912422, "f68b3c2dcbeaaa9fbdd348bbdeb94873"},
      {"train-labels-idx1-ubyte.gz", 28881, "d53e105ee54ea40749a09fcbcd1e9432"},
      {"t10k-images-idx3-ubyte.gz", 1648877, "9fb629c4189551a2d022fa330f9573f3"},
      {"t10k-labels-idx1-ubyte.gz", 4542, "ec29112dd5afa0611ce80d1b7f02629c"}}},
};

struct UrlParts {
    bool https = false;
    std::string host;
    int port = 0;
    std::string path;
};

UrlParts parse_url(const std::string& url) {
    UrlParts parts;
    std::string rest;
    if (url.rfind("https://", 0) == 0) {
        parts.https = true;
        rest = url.substr(8);
    } else if (url.rfind("http://", 0) == 0) {
        rest = url.substr(7);
    } else {
        throw std::invalid_argument("unsupported URL scheme in " + url);
    }
    const auto slash = rest.find('/');
    std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
    parts.path = slash == std::string::npos ? "" : rest.substr(slash);
    while (!parts.path.empty() && parts.path.back() == '/') parts.path.pop_back();
    const auto colon = hostport.find(':');
    if (colon == std::string::npos) {
        parts.host = hostport;
        parts.port = parts.https ? 443 : 80;
    } else {
        parts.host = hostport.substr(0, colon);
        parts.port = std::stoi(hostport.substr(colon + 1));
    }
    return parts;
}

std::string http_get(const UrlParts& url, const std::string& file) {
    const std::string path = url.path + "/" + file;
    auto handle = [&](auto& client) -> std::string {
        client.set_follow_location(true);
        client.set_read_timeout(300, 0);
        auto res = client.Get(path);
        if (!res) throw std::runtime_error("download failed for " + file + ": no response");
        if (res->status != 200) {
            throw std::runtime_error("download failed for " + file + ": HTTP " +
                                     std::to_string(res->status));
        }
        return res->body;
    };
    if (url.https) {
#ifdef PHOTODP_HAVE_OPENSSL
        httplib::SSLClient client(url.host, url.port);
        return handle(client);
#else
        throw std::runtime_error("built without TLS support; use an http:// base URL");
#endif
    }
    httplib::Client client(url.host, url.port);
    return handle(client);
}

int cmd_fetch_data(const std::string& dataset, const std::string& data_dir,
                   const std::string& base_url_override) {
    bool matched = false;
    for (const DatasetSource& src : kSources) {
        if (dataset != "all" && dataset != src.name) continue;
        matched = true;
        const std::filesystem::path dir = std::filesystem::path(data_dir) / src.name;
        std::filesystem::create_directories(dir);
        const std::string base = base_url_override.empty() ? src.base_url : base_url_override;
        for (const DatasetFile& file : src.files) {
            const std::filesystem::path target = dir / file.name;
            if (std::filesystem::exists(target)) {
                const auto bytes = read_file(target);
                if (md5_hex(bytes) == file.md5) {
                    std::printf("  %s: present, checksum ok\n", file.name);
                    continue;
                }
                std::filesystem::remove(target);
                std::printf("  %s: checksum mismatch, removed stale file\n", file.name);
            }
            std::printf("  %s: downloading from %s\n", file.name, base.c_str());
            const std::string body = http_get(parse_url(base), file.name);
            if (body.size() != file.bytes) {
                throw std::runtime_error(std::string(file.name) + ": expected " +
                                         std::to_string(file.bytes) + " bytes, got " +
                                         std::to_string(body.size()));
            }
            std::vector<std::uint8_t> bytes(body.begin(), body.end());
            if (md5_hex(bytes) != file.md5) {
                throw std::runtime_error(std::string(file.name) +
                                         ": checksum mismatch after download");
            }
            std::ofstream os(target, std::ios::binary);
            os.write(body.data(), static_cast<std::streamsize>(body.size()));
            if (!os) throw std::runtime_error("cannot write " + target.string());
        }
        std::printf("%s: all files verified under %s\n", src.name, dir.string().c_str());
    }
    if (!matched) {
        std::fprintf(stderr, "unknown dataset '%s' (expected fashion-mnist, mnist, all)\n",
                     dataset.c_str());
        return kExitConfig;
    }
    return kExitOk;
}

struct CommonOpts {
    std::string config_path;
    std::string manifest_path;
    std::string data_dir;
    std::string out_dir;
    std::optional<double> sigma;
    std::optional<std::uint64_t> seed_data, seed_init, seed_shuffle, seed_noise,
        seed_feedback;
};

ExperimentConfig load_config(const CommonOpts& opts) {
    if (opts.config_path.empty() == opts.manifest_path.empty()) {
        throw std::invalid_argument("pass exactly one of --config or --manifest");
    }
    ExperimentConfig cfg = opts.config_path.empty()
                               ? config_from_manifest_file(opts.manifest_path)
                               : parse_config_file(opts.config_path);
    if (!opts.data_dir.empty()) cfg.data_dir = opts.data_dir;
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    if (opts.sigma) cfg.train.sigma = *opts.sigma;
    if (opts.seed_data) cfg.seed_data = *opts.seed_data;
    if (opts.seed_init) cfg.train.seed_init = *opts.seed_init;
    if (opts.seed_shuffle) cfg.train.seed_shuffle = *opts.seed_shuffle;
    if (opts.seed_noise) cfg.train.seed_noise = *opts.seed_noise;
    if (opts.seed_feedback) cfg.train.seed_feedback = *opts.seed_feedback;
    cfg.validate();
    return cfg;
}

void add_common(CLI::App* app, CommonOpts& opts, bool with_out = true,
                bool with_sigma = true) {
    app->add_option("--config", opts.config_path, "experiment config file");
    app->add_option("--manifest", opts.manifest_path,
                    "manifest.json of a previous run to reproduce");
    app->add_option("--data-dir", opts.data_dir, "dataset directory override");
    if (with_out) app->add_option("--out", opts.out_dir, "output directory override");
    if (with_sigma) app->add_option("--sigma", opts.sigma, "noise scale override");
    app->add_option("--seed-data", opts.seed_data, "validation split seed");
    app->add_option("--seed-init", opts.seed_init, "weight init seed");
    app->add_option("--seed-shuffle", opts.seed_shuffle, "minibatch order seed");
    app->add_option("--seed-noise", opts.seed_noise, "read-out noise seed");
    app->add_option("--seed-feedback", opts.seed_feedback, "feedback matrix seed");
}

int cmd_train(const CommonOpts& opts, bool strict, double tolerance) {
    const ExperimentConfig cfg = load_config(opts);
    const RunOutcome outcome = run_train(cfg);
    std::printf("run %s: final val acc %.2f%%, test acc %.2f%% (%zu steps)\n",
                cfg.name.c_str(), outcome.metrics.final_val_acc * 100.0,
                outcome.metrics.final_test_acc * 100.0, outcome.metrics.total_steps);
    if (outcome.privacy_ok) {
        std::printf("%s", render_report(outcome.privacy).c_str());
    } else {
        std::printf("privacy report unavailable: %s\n", outcome.privacy_error.c_str());
    }
    std::printf("outputs in %s\n", outcome.paths.dir.string().c_str());
    if (strict) {
        if (!cfg.target_accuracy) {
            std::fprintf(stderr, "--strict requires target_accuracy in the config\n");
            return kExitConfig;
        }
        const double got = outcome.metrics.final_test_acc * 100.0;
        if (std::fabs(got - *cfg.target_accuracy) > tolerance) {
            std::fprintf(stderr, "strict: test accuracy %.2f misses target %.2f +- %.2f\n",
                         got, *cfg.target_accuracy, tolerance);
            return kExitTargetMiss;
        }
    }
    return kExitOk;
}

int cmd_sweep(const CommonOpts& opts, const std::vector<double>& sigmas) {
    ExperimentConfig cfg = load_config(opts);
    const std::filesystem::path out_dir =
        opts.out_dir.empty() ? std::filesystem::path(cfg.out_dir) / (cfg.name + "-sweep")
                             : std::filesystem::path(opts.out_dir);
    std::filesystem::create_directories(out_dir);
    const auto rows = run_sweep(cfg, sigmas, out_dir);
    write_sweep_csv(rows, out_dir / "sweep.csv");
    bool all_ok = true;
    for (const SweepRow& row : rows) {
        if (row.ok) {
            std::printf("sigma %-8g test acc %.2f%%\n", row.sigma,
                        row.final_test_acc * 100.0);
        } else {
            all_ok = false;
            std::printf("sigma %-8g FAILED: %s\n", row.sigma, row.error.c_str());
        }
    }
    std::printf("sweep table: %s\n", (out_dir / "sweep.csv").string().c_str());
    return all_ok ? kExitOk : kExitRuntime;
}

int cmd_audit(const CommonOpts& opts) {
    const ExperimentConfig cfg = load_config(opts);
    try {
        const PrivacyReport report = run_audit(cfg);
        std::printf("%s", render_report(report).c_str());
        std::printf("%s\n", privacy_report_json(report).c_str());
    } catch (const std::domain_error& e) {
        std::fprintf(stderr, "audit: the requested bound is undefined: %s\n", e.what());
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "audit: %s\n", e.what());
        return kExitConfig;
    }
    return kExitOk;
}

int cmd_align(const CommonOpts& opts) {
    ExperimentConfig cfg = load_config(opts);
    if (cfg.train.algorithm == Algorithm::BP || cfg.train.algorithm == Algorithm::NoisyBP) {
        std::fprintf(stderr, "align: pick a DFA-family algorithm (dfa, tdfa, pdfa)\n");
        return kExitConfig;
    }
    cfg.train.align_probe = true;
    if (cfg.train.align_every == 0) cfg.train.align_every = 1;
    const RunOutcome outcome = run_train(cfg);
    std::printf("alignment series (%zu probes) in %s\n",
                outcome.metrics.align_step_index.size(),
                outcome.paths.align_csv.string().c_str());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"photonic DFA training with a differential-privacy accountant"};
    app.require_subcommand(1);

    std::string fetch_dataset = "all", fetch_dir = "data", fetch_base;
    CLI::App* fetch = app.add_subcommand("fetch-data", "download and verify dataset files");
    fetch->add_option("--dataset", fetch_dataset, "fashion-mnist, mnist, or all");
    fetch->add_option("--data-dir", fetch_dir, "destination directory");
    fetch->add_option("--base-url", fetch_base, "override the download base URL");

    CommonOpts train_opts;
    bool strict = false;
    double tolerance = 1.5;
    CLI::App* train_cmd = app.add_subcommand("train", "run one training experiment");
    add_common(train_cmd, train_opts);
    train_cmd->add_flag("--strict", strict, "exit 3 when target_accuracy is missed");
    train_cmd->add_option("--tolerance", tolerance, "strict-mode tolerance, accuracy points");

    CommonOpts sweep_opts;
    std::vector<double> sweep_sigmas;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "train once per noise scale");
    add_common(sweep_cmd, sweep_opts, true, false);
    sweep_cmd->add_option("--sigma", sweep_sigmas, "noise scales to sweep")
        ->required()
        ->delimiter(',');

    CommonOpts audit_opts;
    CLI::App* audit_cmd =
        app.add_subcommand("audit", "print the privacy report without training");
    add_common(audit_cmd, audit_opts, false);

    CommonOpts align_opts;
    CLI::App* align_cmd = app.add_subcommand(
        "align", "train while recording update-vs-BP gradient alignment");
    add_common(align_cmd, align_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (fetch->parsed()) return cmd_fetch_data(fetch_dataset, fetch_dir, fetch_base);
        if (train_cmd->parsed()) return cmd_train(train_opts, strict, tolerance);
        if (sweep_cmd->parsed()) return cmd_sweep(sweep_opts, sweep_sigmas);
        if (audit_cmd->parsed()) return cmd_audit(audit_opts);
        if (align_cmd->parsed()) return cmd_align(align_opts);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitOk;
}
