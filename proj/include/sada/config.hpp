// Copyright (c) 2026 The sada authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sada/augment.hpp"
#include "sada/envs.hpp"
#include "sada/networks.hpp"
#include "sada/recipes.hpp"

namespace sada {

/// Flat run configuration. Every field is a `key = value` line in the config
/// file; command-line flags override file values.
struct TrainConfig {
    long long total_steps = 30000;
    long long seed_frames = 4000;
    long long exploration_steps = 2000;
    int update_frequency = 2;
    int batch_size = 256;
    double gamma = 0.99;
    double tau = 0.01;
    double lr = 5e-4;
    long long eval_interval = 2000;
    int eval_episodes = 10;
    unsigned long long seed = 1;
    double init_temperature = 0.1;
    int features_dim = 50;
    int hidden_dim = 1024;
    int conv_filters = 32;
    int frame_stack = 3;
    int action_repeat = 2;
    int obs_size = 84;
    int episode_length = 200;
    long long replay_capacity = 1000000;
    int max_shift_px = 16;
    double max_rotate_deg = 180.0;
    double overlay_alpha = 0.5;
    int weak_pad_px = 4;
    int conv_kernel_size = 3;
    std::string target_form = "sac";
    int greedy_grid = 11;
    std::string recipe = "drq";
    std::string augs = "all";
    bool log_fps = true;
    bool save_buffer = false;
};

namespace config_detail {

enum class FieldKind { integer, real, boolean, text };

struct FieldDef {
    std::string key;
    FieldKind kind;
    std::function<std::string(const TrainConfig&)> get;
    std::function<void(TrainConfig&, const std::string&)> set;
};

inline long long parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        long long x = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (const std::exception&) {
        throw ValidationError(key, "expected integer, got '" + v + "'");
    }
}

inline double parse_real(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (const std::exception&) {
        throw ValidationError(key, "expected real number, got '" + v + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ValidationError(key, "expected true/false, got '" + v + "'");
}

inline std::string fmt_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline const std::vector<FieldDef>& fields() {
    static const std::vector<FieldDef> defs = [] {
        std::vector<FieldDef> f;
        auto add_int = [&](const char* key, auto member) {
            f.push_back({key, FieldKind::integer,
                         [member](const TrainConfig& c) { return std::to_string(c.*member); },
                         [member, key = std::string(key)](TrainConfig& c, const std::string& v) {
                             c.*member =
                                 static_cast<std::decay_t<decltype(std::declval<TrainConfig>().*
                                                                   member)>>(parse_int(key, v));
                         }});
        };
        auto add_real = [&](const char* key, double TrainConfig::*member) {
            f.push_back({key, FieldKind::real,
                         [member](const TrainConfig& c) { return fmt_real(c.*member); },
                         [member, key = std::string(key)](TrainConfig& c, const std::string& v) {
                             c.*member = parse_real(key, v);
                         }});
        };
        auto add_bool = [&](const char* key, bool TrainConfig::*member) {
            f.push_back({key, FieldKind::boolean,
                         [member](const TrainConfig& c) {
                             return std::string(c.*member ? "true" : "false");
                         },
                         [member, key = std::string(key)](TrainConfig& c, const std::string& v) {
                             c.*member = parse_bool(key, v);
                         }});
        };
        auto add_text = [&](const char* key, std::string TrainConfig::*member) {
            f.push_back({key, FieldKind::text,
                         [member](const TrainConfig& c) { return c.*member; },
                         [member](TrainConfig& c, const std::string& v) { c.*member = v; }});
        };
        add_int("total_steps", &TrainConfig::total_steps);
        add_int("seed_frames", &TrainConfig::seed_frames);
        add_int("exploration_steps", &TrainConfig::exploration_steps);
        add_int("update_frequency", &TrainConfig::update_frequency);
        add_int("batch_size", &TrainConfig::batch_size);
        add_real("gamma", &TrainConfig::gamma);
        add_real("tau", &TrainConfig::tau);
        add_real("lr", &TrainConfig::lr);
        add_int("eval_interval", &TrainConfig::eval_interval);
        add_int("eval_episodes", &TrainConfig::eval_episodes);
        add_int("seed", &TrainConfig::seed);
        add_real("init_temperature", &TrainConfig::init_temperature);
        add_int("features_dim", &TrainConfig::features_dim);
        add_int("hidden_dim", &TrainConfig::hidden_dim);
        add_int("conv_filters", &TrainConfig::conv_filters);
        add_int("frame_stack", &TrainConfig::frame_stack);
        add_int("action_repeat", &TrainConfig::action_repeat);
        add_int("obs_size", &TrainConfig::obs_size);
        add_int("episode_length", &TrainConfig::episode_length);
        add_int("replay_capacity", &TrainConfig::replay_capacity);
        add_int("max_shift_px", &TrainConfig::max_shift_px);
        add_real("max_rotate_deg", &TrainConfig::max_rotate_deg);
        add_real("overlay_alpha", &TrainConfig::overlay_alpha);
        add_int("weak_pad_px", &TrainConfig::weak_pad_px);
        add_int("conv_kernel_size", &TrainConfig::conv_kernel_size);
        add_text("target_form", &TrainConfig::target_form);
        add_int("greedy_grid", &TrainConfig::greedy_grid);
        add_text("recipe", &TrainConfig::recipe);
        add_text("augs", &TrainConfig::augs);
        add_bool("log_fps", &TrainConfig::log_fps);
        add_bool("save_buffer", &TrainConfig::save_buffer);
        return f;
    }();
    return defs;
}

inline const FieldDef* find_field(const std::string& key) {
    for (const auto& f : fields())
        if (f.key == key) return &f;
    return nullptr;
}

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace config_detail

/// Range and consistency validation. Throws ValidationError naming the key.
inline void validate_config(const TrainConfig& c) {
    auto require = [](bool ok, const char* key, const char* msg) {
        if (!ok) throw ValidationError(key, msg);
    };
    require(c.total_steps >= 0, "total_steps", "must be >= 0");
    require(c.seed_frames >= 0, "seed_frames", "must be >= 0");
    require(c.exploration_steps >= 0, "exploration_steps", "must be >= 0");
    require(c.update_frequency >= 1, "update_frequency", "must be >= 1");
    require(c.batch_size >= 1, "batch_size", "must be >= 1");
    require(c.gamma > 0.0 && c.gamma <= 1.0, "gamma", "must be in (0, 1]");
    require(c.tau > 0.0 && c.tau <= 1.0, "tau", "must be in (0, 1]");
    require(c.lr > 0.0, "lr", "must be > 0");
    require(c.eval_interval >= 1, "eval_interval", "must be >= 1");
    require(c.eval_episodes >= 1, "eval_episodes", "must be >= 1");
    require(c.init_temperature > 0.0, "init_temperature", "must be > 0");
    require(c.features_dim >= 1, "features_dim", "must be >= 1");
    require(c.hidden_dim >= 1, "hidden_dim", "must be >= 1");
    require(c.conv_filters >= 1, "conv_filters", "must be >= 1");
    require(c.frame_stack >= 1, "frame_stack", "must be >= 1");
    require(c.action_repeat >= 1, "action_repeat", "must be >= 1");
    require(c.obs_size >= 16, "obs_size", "must be >= 16");
    require(c.episode_length >= 1, "episode_length", "must be >= 1");
    require(c.replay_capacity >= 1, "replay_capacity", "must be >= 1");
    require(c.max_shift_px >= 0, "max_shift_px", "must be >= 0");
    require(c.max_rotate_deg >= 0.0 && c.max_rotate_deg <= 180.0, "max_rotate_deg",
            "must be in [0, 180]");
    require(c.overlay_alpha >= 0.0 && c.overlay_alpha <= 1.0, "overlay_alpha",
            "must be in [0, 1]");
    require(c.weak_pad_px >= 0 && c.weak_pad_px < c.obs_size, "weak_pad_px",
            "must be in [0, obs_size)");
    require(c.conv_kernel_size >= 1 && c.conv_kernel_size % 2 == 1, "conv_kernel_size",
            "must be odd and >= 1");
    require(c.target_form == "sac" || c.target_form == "greedy_max", "target_form",
            "must be 'sac' or 'greedy_max'");
    require(c.greedy_grid >= 2, "greedy_grid", "must be >= 2");
    require(c.weak_pad_px >= 0, "weak_pad_px", "must be >= 0");
    bool recipe_ok = false;
    for (const auto& r : recipes::recipe_names()) recipe_ok |= (r == c.recipe);
    require(recipe_ok, "recipe", "unknown recipe");
    require(c.augs == "geometric" || c.augs == "photometric" || c.augs == "all" ||
                c.augs == "none",
            "augs", "must be one of geometric|photometric|all|none");
}

/// Parse `key = value` text plus flag overrides. Unknown keys are rejected;
/// flags take precedence over file values.
inline TrainConfig parse_config_text(const std::string& text,
                                     const std::map<std::string, std::string>& overrides = {}) {
    TrainConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = config_detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config",
                                  "line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = config_detail::trim(t.substr(0, eq));
        const std::string val = config_detail::trim(t.substr(eq + 1));
        const auto* field = config_detail::find_field(key);
        if (!field) throw ValidationError(key, "unknown configuration key");
        field->set(cfg, val);
    }
    for (const auto& [key, val] : overrides) {
        const auto* field = config_detail::find_field(key);
        if (!field) throw ValidationError(key, "unknown configuration key");
        field->set(cfg, val);
    }
    validate_config(cfg);
    return cfg;
}

/// File variant of parse_config_text. An empty path parses defaults plus
/// overrides only.
inline TrainConfig parse_config(const std::string& file_path,
                                const std::map<std::string, std::string>& overrides = {}) {
    std::string text;
    if (!file_path.empty()) {
        std::ifstream f(file_path);
        if (!f) throw ValidationError("config", "cannot read config file: " + file_path);
        std::ostringstream ss;
        ss << f.rdbuf();
        text = ss.str();
    }
    return parse_config_text(text, overrides);
}

/// Canonical `key = value` text, one line per field in declaration order.
/// parse(serialize(c)) == c for every valid config.
inline std::string serialize_config(const TrainConfig& c) {
    std::ostringstream os;
    for (const auto& f : config_detail::fields()) os << f.key << " = " << f.get(c) << "\n";
    return os.str();
}

// ---- derived module configurations -----------------------------------------------

inline envs::EnvConfig env_config(const TrainConfig& c) {
    envs::EnvConfig e;
    e.obs_size = c.obs_size;
    e.frame_stack = c.frame_stack;
    e.episode_length = c.episode_length;
    e.action_repeat = c.action_repeat;
    return e;
}

inline nets::NetConfig net_config(const TrainConfig& c) {
    nets::NetConfig n;
    n.obs_channels = 3 * c.frame_stack;
    n.obs_size = c.obs_size;
    n.conv_filters = c.conv_filters;
    n.features_dim = c.features_dim;
    n.hidden_dim = c.hidden_dim;
    n.action_dim = 2;
    return n;
}

inline augment::AugParams aug_params(const TrainConfig& c) {
    augment::AugParams p;
    p.max_shift_px = c.max_shift_px;
    p.max_rotate_deg = c.max_rotate_deg;
    p.overlay_alpha = c.overlay_alpha;
    p.conv_kernel_size = c.conv_kernel_size;
    p.weak_pad_px = c.weak_pad_px;
    return p;
}

inline recipes::RecipeConfig recipe_config(const TrainConfig& c) {
    auto pool = augment::make_pool(augment::pool_choice_from_string(c.augs), aug_params(c));
    auto r = recipes::make_recipe(c.recipe, std::move(pool), c.weak_pad_px);
    r.target_form = c.target_form == "greedy_max" ? recipes::TargetForm::greedy_max
                                                  : recipes::TargetForm::sac;
    r.greedy_grid = c.greedy_grid;
    return r;
}

}  // namespace sada
