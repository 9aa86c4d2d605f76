#include "photodp/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace photodp {

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
    throw std::invalid_argument("config: line " + std::to_string(line) + ": " + msg);
}

double parse_double(const std::string& v, std::size_t line) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) fail(line, "trailing characters after number '" + v + "'");
        return d;
    } catch (const std::invalid_argument&) {
        fail(line, "expected a number, got '" + v + "'");
    } catch (const std::out_of_range&) {
        fail(line, "number out of range: '" + v + "'");
    }
}

std::uint64_t parse_u64(const std::string& v, std::size_t line) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        fail(line, "expected an unsigned integer, got '" + v + "'");
    }
    return out;
}

bool parse_bool(const std::string& v, std::size_t line) {
    if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
    if (v == "off" || v == "false" || v == "0" || v == "no") return false;
    fail(line, "expected on/off, got '" + v + "'");
}

std::vector<double> parse_double_list(const std::string& v, std::size_t line) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_double(item, line));
    }
    if (out.empty()) fail(line, "expected a comma-separated list of numbers");
    return out;
}

std::vector<std::size_t> parse_size_list(const std::string& v, std::size_t line) {
    std::vector<std::size_t> out;
    for (double d : parse_double_list(v, line)) {
        if (d < 1.0 || d != static_cast<double>(static_cast<std::size_t>(d))) {
            fail(line, "expected positive integers in list");
        }
        out.push_back(static_cast<std::size_t>(d));
    }
    return out;
}

} // namespace

void ExperimentConfig::validate() const {
    if (dataset != "fashion-mnist" && dataset != "mnist") {
        throw std::invalid_argument("config: unknown dataset '" + dataset +
                                    "' (expected fashion-mnist or mnist)");
    }
    if (network.widths.size() < 2) {
        throw std::invalid_argument("config: network needs at least input and output widths");
    }
    if (validation_fraction <= 0.0 || validation_fraction >= 1.0) {
        throw std::invalid_argument("config: validation_fraction must lie in (0,1)");
    }
    if (!(privacy.delta > 0.0) || !(privacy.delta < 1.0)) {
        throw std::invalid_argument("config: delta must lie in (0,1)");
    }
    if (privacy.alpha_grid.empty()) {
        throw std::invalid_argument("config: alpha_grid must not be empty");
    }
    train.validate();
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream is(text);
    std::string raw;
    std::string section;
    std::size_t line_no = 0;
    bool private_set = false;
    while (std::getline(is, raw)) {
        ++line_no;
        std::string line = raw;
        if (const auto hash = line.find_first_of("#;"); hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail(line_no, "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section != "experiment" && section != "network" && section != "train" &&
                section != "clip" && section != "privacy" && section != "data" &&
                section != "seeds") {
                fail(line_no, "unknown section [" + section + "]");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail(line_no, "expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) fail(line_no, "empty key");
        if (section.empty()) fail(line_no, "key '" + key + "' outside any section");

        if (section == "experiment") {
            if (key == "name") cfg.name = value;
            else if (key == "dataset") cfg.dataset = value;
            else if (key == "data_dir") cfg.data_dir = value;
            else if (key == "out_dir") cfg.out_dir = value;
            else if (key == "target_accuracy") cfg.target_accuracy = parse_double(value, line_no);
            else fail(line_no, "unknown key '" + key + "' in [experiment]");
        } else if (section == "network") {
            if (key == "widths") cfg.network.widths = parse_size_list(value, line_no);
            else if (key == "activation") {
                try {
                    cfg.network.hidden = parse_activation(value);
                } catch (const std::invalid_argument& e) {
                    fail(line_no, e.what());
                }
            } else fail(line_no, "unknown key '" + key + "' in [network]");
        } else if (section == "train") {
            if (key == "algorithm") {
                try {
                    cfg.train.algorithm = parse_algorithm(value);
                } catch (const std::invalid_argument& e) {
                    fail(line_no, e.what());
                }
            } else if (key == "private") {
                cfg.train.private_mechanism = parse_bool(value, line_no);
                private_set = true;
            } else if (key == "epochs") cfg.train.epochs = parse_u64(value, line_no);
            else if (key == "batch_size") cfg.train.batch_size = parse_u64(value, line_no);
            else if (key == "learning_rate") cfg.train.learning_rate = parse_double(value, line_no);
            else if (key == "momentum") cfg.train.momentum = parse_double(value, line_no);
            else if (key == "sigma") cfg.train.sigma = parse_double(value, line_no);
            else if (key == "ternary_threshold")
                cfg.train.ternary_threshold = parse_double(value, line_no);
            else if (key == "per_pass_noise")
                cfg.train.per_pass_noise = parse_bool(value, line_no);
            else if (key == "align_probe") cfg.train.align_probe = parse_bool(value, line_no);
            else if (key == "align_every") cfg.train.align_every = parse_u64(value, line_no);
            else fail(line_no, "unknown key '" + key + "' in [train]");
        } else if (section == "clip") {
            if (key == "tau_h_min") cfg.train.clip.tau_h_min = parse_double(value, line_no);
            else if (key == "tau_h_max") cfg.train.clip.tau_h_max = parse_double(value, line_no);
            else if (key == "tau_b") cfg.train.clip.tau_b = parse_double(value, line_no);
            else if (key == "magnitude_floor")
                cfg.train.clip.magnitude_floor = parse_bool(value, line_no);
            else fail(line_no, "unknown key '" + key + "' in [clip]");
        } else if (section == "privacy") {
            if (key == "delta") cfg.privacy.delta = parse_double(value, line_no);
            else if (key == "alpha_grid") cfg.privacy.alpha_grid = parse_double_list(value, line_no);
            else if (key == "variant") {
                try {
                    cfg.privacy.variant = parse_bound_variant(value);
                } catch (const std::invalid_argument& e) {
                    fail(line_no, e.what());
                }
            } else if (key == "composition") {
                if (value == "per-layer") cfg.privacy.composition = Composition::PerLayer;
                else if (value == "uniform") cfg.privacy.composition = Composition::Uniform;
                else fail(line_no, "composition must be per-layer or uniform");
            } else if (key == "t_interpretation") {
                if (value == "steps") cfg.privacy.t_interpretation = TInterpretation::Steps;
                else if (value == "epochs") cfg.privacy.t_interpretation = TInterpretation::Epochs;
                else fail(line_no, "t_interpretation must be steps or epochs");
            } else if (key == "gamma_min") cfg.privacy.gamma_min = parse_double(value, line_no);
            else if (key == "gamma_max") cfg.privacy.gamma_max = parse_double(value, line_no);
            else fail(line_no, "unknown key '" + key + "' in [privacy]");
        } else if (section == "data") {
            if (key == "validation_fraction")
                cfg.validation_fraction = parse_double(value, line_no);
            else fail(line_no, "unknown key '" + key + "' in [data]");
        } else if (section == "seeds") {
            if (key == "data") cfg.seed_data = parse_u64(value, line_no);
            else if (key == "init") cfg.train.seed_init = parse_u64(value, line_no);
            else if (key == "shuffle") cfg.train.seed_shuffle = parse_u64(value, line_no);
            else if (key == "noise") cfg.train.seed_noise = parse_u64(value, line_no);
            else if (key == "feedback") cfg.train.seed_feedback = parse_u64(value, line_no);
            else fail(line_no, "unknown key '" + key + "' in [seeds]");
        }
    }
    // noisy-bp implies the mechanism unless the config said otherwise.
    if (cfg.train.algorithm == Algorithm::NoisyBP && !private_set) {
        cfg.train.private_mechanism = true;
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("config: cannot open " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config_text(ss.str());
}

std::string config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["name"] = cfg.name;
    j["dataset"] = cfg.dataset;
    j["data_dir"] = cfg.data_dir;
    j["out_dir"] = cfg.out_dir;
    j["network"]["widths"] = cfg.network.widths;
    j["network"]["activation"] = to_string(cfg.network.hidden);
    j["train"]["algorithm"] = to_string(cfg.train.algorithm);
    j["train"]["private"] = cfg.train.private_mechanism;
    j["train"]["epochs"] = cfg.train.epochs;
    j["train"]["batch_size"] = cfg.train.batch_size;
    j["train"]["learning_rate"] = cfg.train.learning_rate;
    j["train"]["momentum"] = cfg.train.momentum;
    j["train"]["sigma"] = cfg.train.sigma;
    j["train"]["ternary_threshold"] = cfg.train.ternary_threshold;
    j["train"]["per_pass_noise"] = cfg.train.per_pass_noise;
    j["train"]["align_probe"] = cfg.train.align_probe;
    j["train"]["align_every"] = cfg.train.align_every;
    j["clip"]["tau_h_min"] = cfg.train.clip.tau_h_min;
    j["clip"]["tau_h_max"] = cfg.train.clip.tau_h_max;
    j["clip"]["tau_b"] = cfg.train.clip.tau_b;
    j["clip"]["magnitude_floor"] = cfg.train.clip.magnitude_floor;
    j["privacy"]["delta"] = cfg.privacy.delta;
    j["privacy"]["alpha_grid"] = cfg.privacy.alpha_grid;
    j["privacy"]["variant"] = to_string(cfg.privacy.variant);
    j["privacy"]["composition"] =
        cfg.privacy.composition == Composition::PerLayer ? "per-layer" : "uniform";
    j["privacy"]["t_interpretation"] =
        cfg.privacy.t_interpretation == TInterpretation::Steps ? "steps" : "epochs";
    if (cfg.privacy.gamma_min) j["privacy"]["gamma_min"] = *cfg.privacy.gamma_min;
    if (cfg.privacy.gamma_max) j["privacy"]["gamma_max"] = *cfg.privacy.gamma_max;
    j["data"]["validation_fraction"] = cfg.validation_fraction;
    j["seeds"]["data"] = cfg.seed_data;
    j["seeds"]["init"] = cfg.train.seed_init;
    j["seeds"]["shuffle"] = cfg.train.seed_shuffle;
    j["seeds"]["noise"] = cfg.train.seed_noise;
    j["seeds"]["feedback"] = cfg.train.seed_feedback;
    if (cfg.target_accuracy) j["target_accuracy"] = *cfg.target_accuracy;
    return j.dump(2);
}

ExperimentConfig config_from_json(const std::string& json_text) {
    const json j = json::parse(json_text);
    ExperimentConfig cfg;
    cfg.name = j.at("name").get<std::string>();
    cfg.dataset = j.at("dataset").get<std::string>();
    cfg.data_dir = j.at("data_dir").get<std::string>();
    cfg.out_dir = j.at("out_dir").get<std::string>();
    cfg.network.widths = j.at("network").at("widths").get<std::vector<std::size_t>>();
    cfg.network.hidden = parse_activation(j.at("network").at("activation").get<std::string>());
    const json& t = j.at("train");
    cfg.train.algorithm = parse_algorithm(t.at("algorithm").get<std::string>());
    cfg.train.private_mechanism = t.at("private").get<bool>();
    cfg.train.epochs = t.at("epochs").get<std::size_t>();
    cfg.train.batch_size = t.at("batch_size").get<std::size_t>();
    cfg.train.learning_rate = t.at("learning_rate").get<double>();
    cfg.train.momentum = t.at("momentum").get<double>();
    cfg.train.sigma = t.at("sigma").get<double>();
    cfg.train.ternary_threshold = t.at("ternary_threshold").get<double>();
    cfg.train.per_pass_noise = t.at("per_pass_noise").get<bool>();
    cfg.train.align_probe = t.at("align_probe").get<bool>();
    cfg.train.align_every = t.at("align_every").get<std::size_t>();
    const json& c = j.at("clip");
    cfg.train.clip.tau_h_min = c.at("tau_h_min").get<double>();
    cfg.train.clip.tau_h_max = c.at("tau_h_max").get<double>();
    cfg.train.clip.tau_b = c.at("tau_b").get<double>();
    cfg.train.clip.magnitude_floor = c.at("magnitude_floor").get<bool>();
    const json& p = j.at("privacy");
    cfg.privacy.delta = p.at("delta").get<double>();
    cfg.privacy.alpha_grid = p.at("alpha_grid").get<std::vector<double>>();
    cfg.privacy.variant = parse_bound_variant(p.at("variant").get<std::string>());
    cfg.privacy.composition = p.at("composition").get<std::string>() == "uniform"
                                  ? Composition::Uniform
                                  : Composition::PerLayer;
    cfg.privacy.t_interpretation = p.at("t_interpretation").get<std::string>() == "epochs"
                                       ? TInterpretation::Epochs
                                       : TInterpretation::Steps;
    if (p.contains("gamma_min")) cfg.privacy.gamma_min = p.at("gamma_min").get<double>();
    if (p.contains("gamma_max")) cfg.privacy.gamma_max = p.at("gamma_max").get<double>();
    cfg.validation_fraction = j.at("data").at("validation_fraction").get<double>();
    const json& s = j.at("seeds");
    cfg.seed_data = s.at("data").get<std::uint64_t>();
    cfg.train.seed_init = s.at("init").get<std::uint64_t>();
    cfg.train.seed_shuffle = s.at("shuffle").get<std::uint64_t>();
    cfg.train.seed_noise = s.at("noise").get<std::uint64_t>();
    cfg.train.seed_feedback = s.at("feedback").get<std::uint64_t>();
    if (j.contains("target_accuracy")) {
        cfg.target_accuracy = j.at("target_accuracy").get<double>();
    }
    cfg.validate();
    return cfg;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    const std::string text = config_to_json(cfg);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char ch : text) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace photodp
