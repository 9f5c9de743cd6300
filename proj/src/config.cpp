#include "pavad/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace pavad {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
    T out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    require(ec == std::errc() && ptr == v.data() + v.size(), ErrorKind::Config,
            "bad value '" + v + "' for " + key);
    return out;
}

double parse_real(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used == v.size()) return d;
    } catch (const std::exception&) {
    }
    fail(ErrorKind::Config, "bad value '" + v + "' for " + key);
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    fail(ErrorKind::Config, "bad boolean '" + v + "' for " + key);
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> t;
        auto real = [&t](const char* k, auto member) {
            t[k] = [member](RunConfig& c, const std::string& key, const std::string& v) {
                member(c) = parse_real(key, v);
            };
        };
        auto integer = [&t](const char* k, auto member) {
            t[k] = [member](RunConfig& c, const std::string& key, const std::string& v) {
                member(c) = parse_number<int>(key, v);
            };
        };
        auto boolean = [&t](const char* k, auto member) {
            t[k] = [member](RunConfig& c, const std::string& key, const std::string& v) {
                member(c) = parse_bool(key, v);
            };
        };
        real("p_s", [](RunConfig& c) -> double& { return c.train.p_s; });
        real("p_t", [](RunConfig& c) -> double& { return c.train.p_t; });
        real("ae_lr", [](RunConfig& c) -> double& { return c.train.ae_lr; });
        integer("ae_epochs", [](RunConfig& c) -> int& { return c.train.ae_epochs; });
        integer("ae_batch", [](RunConfig& c) -> int& { return c.train.ae_batch; });
        integer("ae_width_divisor", [](RunConfig& c) -> int& { return c.train.ae_width_divisor; });
        real("disc_lr", [](RunConfig& c) -> double& { return c.train.disc_lr; });
        real("disc_momentum", [](RunConfig& c) -> double& { return c.train.disc_momentum; });
        real("disc_weight_decay", [](RunConfig& c) -> double& { return c.train.disc_weight_decay; });
        integer("disc_epochs", [](RunConfig& c) -> int& { return c.train.disc_epochs; });
        integer("disc_batch", [](RunConfig& c) -> int& { return c.train.disc_batch; });
        boolean("disc_include_temporal", [](RunConfig& c) -> bool& { return c.train.disc_include_temporal; });
        integer("clip_length", [](RunConfig& c) -> int& { return c.train.clip_length; });
        integer("clip_stride", [](RunConfig& c) -> int& { return c.train.clip_stride; });
        boolean("shared_mask", [](RunConfig& c) -> bool& { return c.train.shared_mask; });
        boolean("temporal_pa_per_map", [](RunConfig& c) -> bool& { return c.train.temporal_pa_per_map; });
        t["flow_max_px"] = [](RunConfig& c, const std::string& key, const std::string& v) {
            c.train.flow_max_px = static_cast<float>(parse_real(key, v));
        };
        boolean("flow_pad_to_three", [](RunConfig& c) -> bool& { return c.train.flow_pad_to_three; });
        t["seed"] = [](RunConfig& c, const std::string& key, const std::string& v) {
            c.seed = parse_number<std::uint64_t>(key, v);
            c.train.seed = c.seed;
        };
        t["dataset_root"] = [](RunConfig& c, const std::string&, const std::string& v) { c.dataset_root = v; };
        t["out_root"] = [](RunConfig& c, const std::string&, const std::string& v) { c.out_root = v; };
        t["profile"] = [](RunConfig& c, const std::string&, const std::string& v) {
            c.weights = weight_profile(v);
            c.profile = v;
        };
        real("eta1", [](RunConfig& c) -> double& { c.profile = "custom"; return c.weights.eta1; });
        real("eta2", [](RunConfig& c) -> double& { c.profile = "custom"; return c.weights.eta2; });
        real("eta3", [](RunConfig& c) -> double& { c.profile = "custom"; return c.weights.eta3; });
        integer("frame_height", [](RunConfig& c) -> int& { return c.frame_height; });
        integer("frame_width", [](RunConfig& c) -> int& { return c.frame_width; });
        t["inpainter"] = [](RunConfig& c, const std::string& key, const std::string& v) {
            require(v == "builtin-distorter" || v == "external-diffusion", ErrorKind::Config,
                    "bad value '" + v + "' for " + key + " (builtin-distorter, external-diffusion)");
            c.inpainter = v;
        };
        t["inpainter_executable"] = [](RunConfig& c, const std::string&, const std::string& v) {
            c.inpainter_executable = v;
        };
        integer("inpainter_steps", [](RunConfig& c) -> int& { return c.inpainter_steps; });
        integer("inpainter_timeout_s", [](RunConfig& c) -> int& { return c.inpainter_timeout_s; });
        boolean("use_pa_cache", [](RunConfig& c) -> bool& { return c.use_pa_cache; });
        t["flow"] = [](RunConfig& c, const std::string& key, const std::string& v) {
            require(v == "tvl1", ErrorKind::Config, "bad value '" + v + "' for " + key + " (tvl1)");
            c.flow = v;
        };
        t["features"] = [](RunConfig& c, const std::string& key, const std::string& v) {
            require(v == "file" || v == "builtin", ErrorKind::Config,
                    "bad value '" + v + "' for " + key + " (file, builtin)");
            c.features = v;
        };
        t["features_dir"] = [](RunConfig& c, const std::string&, const std::string& v) { c.features_dir = v; };
        t["mask_source"] = [](RunConfig& c, const std::string&, const std::string& v) {
            c.mask_source = parse_mask_source(v);
        };
        t["psnr_peak"] = [](RunConfig& c, const std::string&, const std::string& v) {
            c.psnr_peak = parse_psnr_peak(v);
        };
        integer("score_batch", [](RunConfig& c) -> int& { return c.score_batch; });
        return t;
    }();
    return table;
}

}  // namespace

void RunConfig::validate() const {
    train.validate();
    weights.validate();
    require(frame_height > 0 && frame_width > 0 && frame_height % kSpatialMultiple == 0 &&
                frame_width % kSpatialMultiple == 0,
            ErrorKind::Config, "frame size must be a positive multiple of 16");
    require(inpainter_steps >= 1 && inpainter_timeout_s >= 1, ErrorKind::Config,
            "inpainter steps and timeout must be positive");
    require(score_batch >= 1, ErrorKind::Config, "score_batch must be >= 1");
    if (inpainter == "external-diffusion")
        require(!inpainter_executable.empty(), ErrorKind::Config,
                "external-diffusion needs inpainter_executable");
}

std::filesystem::path RunConfig::resolved_features_dir() const {
    return features_dir.empty() ? dataset_root / "features" : features_dir;
}

std::filesystem::path RunConfig::resolved_inpainter() const {
    if (inpainter_executable.empty() || inpainter_executable.is_absolute()) return inpainter_executable;
    if (const char* dir = std::getenv("PAVAD_BACKEND_DIR")) return std::filesystem::path(dir) / inpainter_executable;
    return inpainter_executable;
}

std::map<std::string, std::string> parse_key_values(const std::string& text, const std::string& origin) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        require(eq != std::string::npos, ErrorKind::Config,
                origin + ":" + std::to_string(number) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        require(!key.empty(), ErrorKind::Config, origin + ":" + std::to_string(number) + ": empty key");
        out[key] = trim(line.substr(eq + 1));
    }
    return out;
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    require(in.good(), ErrorKind::Config, "cannot read config file " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_key_values(ss.str(), file.string());
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
    const auto it = setters().find(key);
    require(it != setters().end(), ErrorKind::Config, "unknown config key '" + key + "'");
    it->second(config, key, value);
}

void apply_override(RunConfig& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    require(eq != std::string::npos && eq > 0, ErrorKind::Config,
            "override must look like key=value, got '" + assignment + "'");
    apply_setting(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& [k, _] : setters()) keys.push_back(k);
    return keys;
}

nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j = to_json(c.train);
    j["dataset_root"] = c.dataset_root.string();
    j["out_root"] = c.out_root.string();
    j["profile"] = c.profile;
    j["eta1"] = c.weights.eta1;
    j["eta2"] = c.weights.eta2;
    j["eta3"] = c.weights.eta3;
    j["frame_height"] = c.frame_height;
    j["frame_width"] = c.frame_width;
    j["inpainter"] = c.inpainter;
    j["inpainter_executable"] = c.inpainter_executable.string();
    j["inpainter_steps"] = c.inpainter_steps;
    j["inpainter_timeout_s"] = c.inpainter_timeout_s;
    j["use_pa_cache"] = c.use_pa_cache;
    j["flow"] = c.flow;
    j["features"] = c.features;
    j["features_dir"] = c.resolved_features_dir().string();
    j["mask_source"] = to_string(c.mask_source);
    j["psnr_peak"] = to_string(c.psnr_peak);
    j["score_batch"] = c.score_batch;
    j["seed"] = c.seed;
    return j;
}

}  // namespace pavad
