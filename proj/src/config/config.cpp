#include "hazesplat/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace hazesplat {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T v{};
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) throw ConfigError("config: bad value '" + text + "' for " + key);
    return v;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct Field {
    std::function<void(PipelineConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const PipelineConfig&)> get;
};

// Member accessor pairs keyed by name.
template <typename Get>
Field field(Get ref) {
    using T = std::remove_reference_t<decltype(ref(std::declval<PipelineConfig&>()))>;
    Field f;
    f.set = [ref](PipelineConfig& c, const std::string& key, const std::string& text) {
        ref(c) = parse_number<T>(key, text);
    };
    f.get = [ref](const PipelineConfig& c) {
        const T v = ref(const_cast<PipelineConfig&>(c));
        if constexpr (std::is_floating_point_v<T>) return fmt(v);
        else return std::to_string(v);
    };
    return f;
}

const std::vector<std::pair<std::string, Field>>& fields() {
    static const std::vector<std::pair<std::string, Field>> table = [] {
        std::vector<std::pair<std::string, Field>> t;
        auto add = [&t](const char* name, Field f) { t.emplace_back(name, std::move(f)); };
        add("total_steps", field([](PipelineConfig& c) -> int& { return c.train.optim.total_steps; }));
        add("val_interval", field([](PipelineConfig& c) -> int& { return c.train.optim.val_interval; }));
        add("lr_means", field([](PipelineConfig& c) -> double& { return c.train.optim.lr_means; }));
        add("lr_colors", field([](PipelineConfig& c) -> double& { return c.train.optim.lr_colors; }));
        add("lr_opacities", field([](PipelineConfig& c) -> double& { return c.train.optim.lr_opacities; }));
        add("lr_scales", field([](PipelineConfig& c) -> double& { return c.train.optim.lr_scales; }));
        add("adam_beta1", field([](PipelineConfig& c) -> double& { return c.train.optim.adam_beta1; }));
        add("adam_beta2", field([](PipelineConfig& c) -> double& { return c.train.optim.adam_beta2; }));
        add("adam_eps", field([](PipelineConfig& c) -> double& { return c.train.optim.adam_eps; }));
        t.emplace_back("strategy",
                       Field{[](PipelineConfig& c, const std::string&, const std::string& v) {
                                 try {
                                     c.train.densify.strategy = parse_strategy(v);
                                 } catch (const InvariantError& e) {
                                     throw ConfigError(e.what());
                                 }
                             },
                             [](const PipelineConfig& c) { return to_string(c.train.densify.strategy); }});
        add("cap_max", field([](PipelineConfig& c) -> std::size_t& { return c.train.densify.cap_max; }));
        add("noise_lr", field([](PipelineConfig& c) -> double& { return c.train.densify.noise_lr; }));
        add("noise_decay_step", field([](PipelineConfig& c) -> int& { return c.train.densify.noise_decay_step; }));
        add("densify_start", field([](PipelineConfig& c) -> int& { return c.train.densify.densify_start; }));
        add("densify_stop", field([](PipelineConfig& c) -> int& { return c.train.densify.densify_stop; }));
        add("refine_interval", field([](PipelineConfig& c) -> int& { return c.train.densify.refine_interval; }));
        add("opacity_prune_threshold",
            field([](PipelineConfig& c) -> double& { return c.train.densify.opacity_prune_threshold; }));
        add("default_grad_threshold",
            field([](PipelineConfig& c) -> double& { return c.train.densify.default_grad_threshold; }));
        add("growth_rate", field([](PipelineConfig& c) -> double& { return c.train.densify.growth_rate; }));
        add("lambda_ssim", field([](PipelineConfig& c) -> double& { return c.train.weights.lambda_ssim; }));
        add("lambda_dcp", field([](PipelineConfig& c) -> double& { return c.train.weights.lambda_dcp; }));
        add("lambda_depth", field([](PipelineConfig& c) -> double& { return c.train.weights.lambda_depth; }));
        add("lambda_grad", field([](PipelineConfig& c) -> double& { return c.train.weights.lambda_grad; }));
        add("dcp_loss_patch", field([](PipelineConfig& c) -> int& { return c.train.weights.dcp_patch; }));
        add("dcp_patch", field([](PipelineConfig& c) -> int& { return c.train.dcp.patch_size; }));
        add("dcp_omega", field([](PipelineConfig& c) -> double& { return c.train.dcp.omega; }));
        add("dcp_t_floor", field([](PipelineConfig& c) -> double& { return c.train.dcp.t_floor; }));
        add("dcp_airlight_fraction",
            field([](PipelineConfig& c) -> double& { return c.train.dcp.airlight_fraction; }));
        add("gamma", field([](PipelineConfig& c) -> double& { return c.train.gamma; }));
        add("init_points", field([](PipelineConfig& c) -> std::size_t& { return c.train.init_points; }));
        add("scene_scale", field([](PipelineConfig& c) -> double& { return c.train.scene_scale; }));
        add("seed", field([](PipelineConfig& c) -> std::uint64_t& { return c.seed; }));
        return t;
    }();
    return table;
}

const Field& find_field(const std::string& key) {
    for (const auto& [name, f] : fields())
        if (name == key) return f;
    throw ConfigError("config: unknown key '" + key + "'");
}

}  // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& [name, f] : fields()) k.push_back(name);
        return k;
    }();
    return keys;
}

void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value) {
    find_field(key).set(cfg, key, value);
}

std::string get_config_value(const PipelineConfig& cfg, const std::string& key) { return find_field(key).get(cfg); }

void apply_config_text(PipelineConfig& cfg, const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key or value");
        set_config_value(cfg, key, value);
    }
}

void apply_config_file(PipelineConfig& cfg, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    apply_config_text(cfg, text.str());
}

std::string format_config(const PipelineConfig& cfg) {
    std::string out;
    for (const auto& [name, f] : fields()) out += name + " = " + f.get(cfg) + "\n";
    return out;
}

}  // namespace hazesplat
