// Copyright (c) 2026 The sada authors
// SPDX-License-Identifier: Apache-2.0

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sada/config.hpp"
#include "sada/evalmetrics.hpp"
#include "sada/imageio.hpp"
#include "sada/plot.hpp"
#include "sada/stats.hpp"
#include "sada/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using Real = float;

namespace {

std::string iso_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", std::gmtime(&t));
    return buf;
}

std::string default_out_dir(const sada::TrainConfig& cfg) {
    const char* root = std::getenv("SADA_RUN_DIR");
    const std::string base = root && *root ? root : "runs";
    return base + "/" + cfg.recipe + "-" + cfg.augs + "-seed" + std::to_string(cfg.seed);
}

json config_as_json(const sada::TrainConfig& cfg) {
    json j;
    for (const auto& f : sada::config_detail::fields()) j[f.key] = f.get(cfg);
    return j;
}

void write_manifest(const std::string& out_dir, const sada::TrainConfig& cfg) {
    json j;
    j["recipe"] = cfg.recipe;
    j["augs"] = cfg.augs;
    j["seed"] = cfg.seed;
    j["code_version"] = sada::kVersion;
    j["start_time"] = iso_now();
    j["config"] = config_as_json(cfg);
    j["artifacts"] = {{"metrics", "train.csv"},
                      {"eval_metrics", "eval.csv"},
                      {"final_checkpoint", "ckpt_final.sada"},
                      {"status", "status.json"}};
    std::ofstream f(out_dir + "/manifest.json");
    if (!f) throw sada::IoError("cannot write manifest in " + out_dir);
    f << j.dump(2) << "\n";
}

std::vector<double> read_scores(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw sada::IoError("cannot read score file: " + path);
    std::vector<double> values;
    std::string line;
    while (std::getline(f, line)) {
        std::string t;
        for (char c : line)
            if (!std::isspace(static_cast<unsigned char>(c))) t += c;
        if (t.empty()) continue;
        try {
            values.push_back(std::stod(t));
        } catch (const std::exception&) {
            throw sada::IoError("non-numeric score in " + path + ": '" + line + "'");
        }
    }
    if (values.size() < 2) throw sada::IoError("need at least 2 scores in " + path);
    return values;
}

int cmd_train(const std::string& config_path, std::map<std::string, std::string> overrides,
              std::string out_dir) {
    sada::TrainConfig cfg = sada::parse_config(config_path, overrides);
    if (out_dir.empty()) out_dir = default_out_dir(cfg);
    fs::create_directories(out_dir);
    {
        std::ofstream f(out_dir + "/config.txt");
        f << sada::serialize_config(cfg);
    }
    write_manifest(out_dir, cfg);

    sada::trainer::Trainer<Real> trainer(cfg);
    try {
        auto result = trainer.run(out_dir);
        json status;
        status["end_time"] = iso_now();
        status["steps"] = result.steps;
        status["episodes"] = result.episodes;
        status["last_episode_reward"] = result.last_episode_reward;
        status["final_checkpoint"] = result.final_checkpoint;
        std::ofstream f(out_dir + "/status.json");
        f << status.dump(2) << "\n";
        std::cout << "run complete: " << result.steps << " steps, " << result.episodes
                  << " episodes, final checkpoint " << result.final_checkpoint << "\n";
        return 0;
    } catch (const sada::TrainAbortError& e) {
        json diag;
        diag["step"] = e.step;
        diag["loss"] = e.loss_name;
        diag["rng_state"] = e.rng_state;
        std::ofstream f(out_dir + "/abort.json");
        f << diag.dump(2) << "\n";
        std::cerr << "training aborted: " << e.what() << "\n";
        return 3;
    }
}

int cmd_eval(const std::string& checkpoint, const std::string& distributions, int episodes,
             std::uint64_t seed, const std::string& out_path) {
    sada::TrainConfig cfg;
    auto agent = sada::trainer::load_agent<Real>(checkpoint, &cfg);
    std::vector<std::string> names;
    if (distributions == "all") {
        names = sada::envs::all_distribution_names();
    } else {
        std::stringstream ss(distributions);
        std::string item;
        while (std::getline(ss, item, ',')) names.push_back(item);
    }
    const std::uint64_t before = agent.params_hash();
    json per;
    sada::Rng rng(seed ^ 0xe7a1ull);
    for (const auto& name : names) {
        auto stats = sada::evalmetrics::evaluate(agent, sada::env_config(cfg),
                                                 sada::envs::parse_distribution(name), episodes,
                                                 rng);
        per[name] = {{"mean_reward", stats.mean_reward},
                     {"std_reward", stats.std_reward},
                     {"episodes", stats.episodes},
                     {"success_rate", stats.success_rate}};
        std::cout << name << ": mean " << stats.mean_reward << " std " << stats.std_reward
                  << " success " << stats.success_rate << "\n";
    }
    if (agent.params_hash() != before) throw sada::ContractError("evaluation mutated parameters");
    json report;
    report["checkpoint_id"] = checkpoint;
    report["seeds"] = std::vector<std::uint64_t>{seed};
    report["episodes"] = episodes;
    report["per_distribution"] = per;
    std::ofstream f(out_path);
    if (!f) throw sada::IoError("cannot write report: " + out_path);
    f << report.dump(2) << "\n";
    return 0;
}

int cmd_stats(const std::string& a_path, const std::vector<std::string>& b_paths, double alpha,
              const std::string& out_path) {
    sada::stats::SampleSet a{fs::path(a_path).stem().string(), read_scores(a_path)};
    json comparisons = json::array();
    std::vector<double> pvals;
    for (const auto& bp : b_paths) {
        sada::stats::SampleSet b{fs::path(bp).stem().string(), read_scores(bp)};
        auto r = sada::stats::welch_one_tailed(a, b, alpha);
        comparisons.push_back({{"a", a.label},
                               {"b", b.label},
                               {"t", r.t},
                               {"p", r.p},
                               {"dof", r.dof}});
        pvals.push_back(r.p);
        std::cout << a.label << " > " << b.label << ": t=" << r.t << " p=" << r.p
                  << " dof=" << r.dof << "\n";
    }
    auto holm = sada::stats::holm_bonferroni(pvals, alpha);
    json holm_json = json::array();
    for (std::size_t i = 0; i < holm.size(); ++i) {
        holm_json.push_back({{"p", holm[i].p},
                             {"adjusted_alpha", holm[i].adjusted_alpha},
                             {"reject", holm[i].reject}});
        std::cout << "holm[" << i << "]: p=" << holm[i].p << " adjusted_alpha="
                  << holm[i].adjusted_alpha << (holm[i].reject ? " reject" : " keep") << "\n";
    }
    json out;
    out["alpha"] = alpha;
    out["comparisons"] = comparisons;
    out["holm"] = holm_json;
    std::ofstream f(out_path);
    if (!f) throw sada::IoError("cannot write table: " + out_path);
    f << out.dump(2) << "\n";
    return 0;
}

int cmd_render_augs(const std::string& env_name, std::uint64_t seed,
                    const std::string& out_dir, const std::string& config_path) {
    sada::TrainConfig cfg = sada::parse_config(config_path);
    fs::create_directories(out_dir);
    sada::envs::PointGoalEnv env(sada::env_config(cfg), sada::envs::parse_distribution(env_name));
    auto obs = env.reset(seed);
    // advance a few steps so the frame stack carries motion
    for (int i = 0; i < 3; ++i) obs = env.step({0.4, -0.2}).obs;
    auto t = obs.to_tensor<float>();
    sada::Rng rng(seed);
    const auto params = sada::aug_params(cfg);
    std::vector<std::pair<std::string, sada::Tensor<float>>> panels;
    panels.emplace_back("identity", t);
    panels.emplace_back("weak_shift", sada::augment::apply_weak(t, rng, params.weak_pad_px));
    for (auto name :
         {sada::augment::AugName::shift, sada::augment::AugName::rotate,
          sada::augment::AugName::rotate_shift, sada::augment::AugName::conv,
          sada::augment::AugName::overlay, sada::augment::AugName::conv_overlay}) {
        auto spec = sada::augment::make_spec(name, params);
        auto d = sada::augment::sample_draw(spec, rng);
        panels.emplace_back(sada::augment::to_string(name), sada::augment::apply_draw(t, d));
    }
    const int S = cfg.obs_size, gap = 2;
    std::vector<std::uint8_t> grid(std::size_t(S) * ((S + gap) * panels.size()) * 3, 255);
    const int gw = int((S + gap) * panels.size());
    for (std::size_t k = 0; k < panels.size(); ++k) {
        sada::write_frame_ppm(out_dir + "/" + panels[k].first + ".ppm", panels[k].second);
        for (int r = 0; r < S; ++r)
            for (int c = 0; c < S; ++c)
                for (int ch = 0; ch < 3; ++ch) {
                    const double v =
                        std::clamp(double(panels[k].second.at(ch, r, c)), 0.0, 1.0);
                    grid[(std::size_t(r) * gw + k * (S + gap) + c) * 3 + ch] =
                        std::uint8_t(v * 255.0 + 0.5);
                }
    }
    sada::write_ppm(out_dir + "/grid.ppm", S, gw, grid);
    std::cout << "wrote " << panels.size() << " augmentation panels to " << out_dir << "\n";
    return 0;
}

int cmd_render_testsets(std::uint64_t seed, const std::string& out_dir,
                        const std::string& config_path) {
    sada::TrainConfig cfg = sada::parse_config(config_path);
    fs::create_directories(out_dir);
    for (const auto& name : sada::envs::all_distribution_names()) {
        sada::envs::PointGoalEnv env(sada::env_config(cfg), sada::envs::parse_distribution(name));
        auto obs = env.reset(seed);
        for (int i = 0; i < 3; ++i) obs = env.step({0.3, 0.1}).obs;
        sada::write_frame_ppm(out_dir + "/" + name + ".ppm", obs.to_tensor<float>());
    }
    std::cout << "wrote 13 distribution samples to " << out_dir << "\n";
    return 0;
}

int cmd_plot(const std::vector<std::string>& runs, const std::vector<std::string>& reports,
             const std::string& out_dir, long long bin_width) {
    fs::create_directories(out_dir);
    if (!runs.empty()) {
        sada::plot::render_training_curves(runs, out_dir + "/train_curve.ppm", bin_width);
        std::cout << "wrote " << out_dir << "/train_curve.ppm\n";
    }
    if (!reports.empty()) {
        std::map<std::string, std::vector<double>> per_label;
        std::vector<std::string> order;
        for (const auto& rp : reports) {
            std::ifstream f(rp);
            if (!f) throw sada::IoError("cannot read report: " + rp);
            json j;
            f >> j;
            for (auto& [name, stats] : j.at("per_distribution").items()) {
                if (!per_label.count(name)) order.push_back(name);
                per_label[name].push_back(stats.at("mean_reward").get<double>());
            }
        }
        std::vector<std::vector<double>> values;
        for (const auto& name : order) values.push_back(per_label[name]);
        sada::plot::render_eval_bars(order, values, out_dir + "/eval_bars.ppm");
        std::cout << "wrote " << out_dir << "/eval_bars.ppm\n";
    }
    if (runs.empty() && reports.empty())
        throw sada::ValidationError("plot", "nothing to plot: pass --runs and/or --reports");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"visual actor-critic with selective data augmentation"};
    app.require_subcommand(1);

    // train
    auto* train = app.add_subcommand("train", "train an agent");
    std::string config_path, out_dir, recipe, augs;
    std::vector<std::string> sets;
    std::int64_t seed = -1;
    train->add_option("--config", config_path, "key = value config file");
    train->add_option("--recipe", recipe, "drq|drq_aug|svea|sada|sada_naive_actor|"
                                          "sada_naive_critic|sada_no_critic_aug");
    train->add_option("--augs", augs, "geometric|photometric|all|none");
    train->add_option("--seed", seed, "master seed");
    train->add_option("--out", out_dir, "output directory (default $SADA_RUN_DIR)");
    train->add_option("--set", sets, "extra key=value overrides")->take_all();

    // eval
    auto* eval = app.add_subcommand("eval", "zero-shot evaluation of a checkpoint");
    std::string ckpt, distributions = "all", report_out = "report.json";
    int episodes = 100;
    std::uint64_t eval_seed = 7;
    eval->add_option("--checkpoint", ckpt, "checkpoint path")->required();
    eval->add_option("--distributions", distributions, "all or comma-separated names");
    eval->add_option("--episodes", episodes, "episodes per distribution");
    eval->add_option("--seed", eval_seed, "evaluation seed");
    eval->add_option("--out", report_out, "report json path");

    // stats
    auto* stats_cmd = app.add_subcommand("stats", "one-tailed Welch test with Holm correction");
    std::string a_path, table_out = "table.json";
    std::vector<std::string> b_paths;
    double alpha = 0.05;
    stats_cmd->add_option("--a", a_path, "scores of method A (one per row)")->required();
    stats_cmd->add_option("--b", b_paths, "scores of method B (repeatable)")
        ->required()
        ->take_all();
    stats_cmd->add_option("--alpha", alpha, "significance level");
    stats_cmd->add_option("--out", table_out, "output json path");

    // render-augs
    auto* raug = app.add_subcommand("render-augs", "emit augmented observation samples");
    std::string raug_env = "train", raug_out = "aug_samples", raug_cfg;
    std::uint64_t raug_seed = 1;
    raug->add_option("--env", raug_env, "distribution to render from");
    raug->add_option("--seed", raug_seed, "sample seed");
    raug->add_option("--out-dir", raug_out, "output directory");
    raug->add_option("--config", raug_cfg, "config file");

    // render-testsets
    auto* rts = app.add_subcommand("render-testsets", "emit one sample per distribution");
    std::string rts_out = "testset_samples", rts_cfg;
    std::uint64_t rts_seed = 1;
    rts->add_option("--seed", rts_seed, "sample seed");
    rts->add_option("--out-dir", rts_out, "output directory");
    rts->add_option("--config", rts_cfg, "config file");

    // plot
    auto* plot_cmd = app.add_subcommand("plot", "training curves and evaluation bars");
    std::vector<std::string> plot_runs, plot_reports;
    std::string plot_out = "plots";
    long long bin_width = 1000;
    plot_cmd->add_option("--runs", plot_runs, "run directories with train.csv")->take_all();
    plot_cmd->add_option("--reports", plot_reports, "evaluation report json files")->take_all();
    plot_cmd->add_option("--out", plot_out, "output directory");
    plot_cmd->add_option("--bin-width", bin_width, "steps per curve bin");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            std::map<std::string, std::string> overrides;
            for (const auto& kv : sets) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos)
                    throw sada::ValidationError("set", "expected key=value, got '" + kv + "'");
                overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
            }
            if (!recipe.empty()) overrides["recipe"] = recipe;
            if (!augs.empty()) overrides["augs"] = augs;
            if (seed >= 0) overrides["seed"] = std::to_string(seed);
            return cmd_train(config_path, overrides, out_dir);
        }
        if (eval->parsed()) return cmd_eval(ckpt, distributions, episodes, eval_seed, report_out);
        if (stats_cmd->parsed()) return cmd_stats(a_path, b_paths, alpha, table_out);
        if (raug->parsed()) return cmd_render_augs(raug_env, raug_seed, raug_out, raug_cfg);
        if (rts->parsed()) return cmd_render_testsets(rts_seed, rts_out, rts_cfg);
        if (plot_cmd->parsed()) return cmd_plot(plot_runs, plot_reports, plot_out, bin_width);
    } catch (const sada::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const sada::RangeError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const sada::InvalidSpecError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const sada::TrainAbortError& e) {
        std::cerr << "runtime abort: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
