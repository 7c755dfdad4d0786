#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "autolap/config.hpp"
#include "autolap/course.hpp"
#include "autolap/iql.hpp"
#include "autolap/run.hpp"

using namespace autolap;

namespace {

struct CommonOpts {
    std::string config_file;
    std::vector<std::string> sets;
};

void add_common(CLI::App* sub, CommonOpts& co) {
    sub->add_option("--config", co.config_file, "config file, key=value lines");
    sub->add_option("--set", co.sets, "override one config key, key=value")
        ->take_all();
}

RunConfig build_config(const CommonOpts& co) {
    RunConfig cfg;
    if (!co.config_file.empty()) cfg = load_config(co.config_file);
    for (const auto& kv : co.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("--set expects key=value, got: " + kv);
        set_config_key(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    f << text;
    if (!f) throw std::runtime_error("cannot write: " + path);
}

int cmd_gen_prior(const CommonOpts& co, const std::string& out) {
    RunConfig cfg = build_config(co);
    PriorDataset ds = generate_prior_dataset(cfg.seed, cfg.prior_maps, cfg.prior_steps,
                                             cfg.net, cfg.raster(), cfg.dyn);
    save_prior_dataset(out, ds);
    std::printf("gen-prior: %zu maps, %zu steps -> %s\n", ds.trajectories.size(),
                ds.total_steps(), out.c_str());
    return 0;
}

int cmd_pretrain(const CommonOpts& co, const std::string& data, const std::string& out) {
    RunConfig cfg = build_config(co);
    PriorDataset ds = load_prior_dataset(data, cfg.net, cfg.raster());
    std::printf("pretrain: %zu steps loaded, %d updates\n", ds.total_steps(),
                cfg.iql_updates);
    IqlTrainer trainer(cfg.net, cfg.iql, cfg.seed);
    const int stride = std::max(1, cfg.iql_updates / 10);
    for (int i = 0; i < cfg.iql_updates; ++i) {
        trainer.update(ds, cfg.reward);
        if ((i + 1) % stride == 0 || i + 1 == cfg.iql_updates) {
            const auto& st = trainer.stats();
            std::printf("  update %d  critic %.4f  value %.4f  actor %.4f  q %.3f\n",
                        i + 1, st.critic_loss, st.value_loss, st.actor_loss, st.mean_q);
        }
    }
    save_params(out, trainer.freeze_encoder());
    std::printf("pretrain: encoder -> %s\n", out.c_str());
    return 0;
}

int cmd_demo_lap(const CommonOpts& co, const std::string& out) {
    RunConfig cfg = build_config(co);
    CourseMap cm = generate_course(cfg.course_seed);
    std::printf("demo-lap: course %llu, loop %.1f m, %zu wall boxes\n",
                (unsigned long long)cfg.course_seed, cm.path.total,
                cm.map.obstacles.size());
    try {
        DemoLap demo = record_demo_lap(cm, cfg.n_checkpoints, cfg.reach_radius,
                                       cfg.raster(), cfg.dyn, cfg.ranges);
        save_demo(out, cm, demo);
        std::printf("demo-lap: %.2f s over %.1f m, %d collisions -> %s\n",
                    demo.lap_time, demo.driven_length, demo.collisions, out.c_str());
        const double oracle = oracle_lap_time(cm, cfg.dyn, cfg.ranges);
        if (oracle > 0) std::printf("demo-lap: scripted oracle %.2f s\n", oracle);
        return 0;
    } catch (const DemoError& e) {
        std::filesystem::create_directories(out);
        std::string csv = "x,y\n";
        char buf[64];
        for (const auto& p : e.trajectory) {
            std::snprintf(buf, sizeof(buf), "%.4f,%.4f\n", p.x, p.y);
            csv += buf;
        }
        write_file(out + "/demo_fail.csv", csv);
        std::fprintf(stderr, "demo-lap failed: %s (trace -> %s/demo_fail.csv)\n",
                     e.message.c_str(), out.c_str());
        return 1;
    }
}

int cmd_train(const CommonOpts& co, const std::string& out) {
    RunConfig cfg = build_config(co);
    if (!out.empty()) cfg.out_dir = out;
    TrainResult res = run_training(cfg);
    std::printf("train: %llu env steps, %d laps, best %.2f s, median(last5) %.2f s, "
                "%llu updates (%.1f/s)\n",
                (unsigned long long)res.env_steps, res.summary.laps_completed,
                res.summary.best_lap, res.summary.median_last5,
                (unsigned long long)res.learner.updates, res.updates_per_sec);
    std::printf("train: outputs in %s\n", cfg.out_dir.c_str());
    return 0;
}

int cmd_eval(const CommonOpts& co, const std::string& run_dir, std::string params_file,
             int laps, uint64_t eval_seed, bool seed_given, const std::string& out) {
    CommonOpts eff = co;
    if (eff.config_file.empty()) eff.config_file = run_dir + "/config.txt";
    RunConfig cfg = build_config(eff);
    if (params_file.empty()) params_file = run_dir + "/actor_final.flpw";
    ParamSet snapshot = load_params(params_file);
    ParamSet frozen;
    const ParamSet* fz = nullptr;
    if (!cfg.state_based && !cfg.no_pretrain) {
        frozen = load_params(cfg.encoder_file);
        fz = &frozen;
    }
    if (laps <= 0) laps = cfg.eval_laps;
    if (!seed_given) eval_seed = cfg.seed;
    EvalResult r = evaluate_policy(cfg, snapshot, fz, laps, eval_seed);
    for (size_t i = 0; i < r.lap_times.size(); ++i)
        std::printf("eval: lap %zu  %.2f s\n", i + 1, r.lap_times[i]);
    std::printf("eval: median %.2f s, %d dnf, %d collisions over %d attempts\n",
                r.median_lap, r.dnf, r.collisions, laps);
    if (!out.empty()) {
        nlohmann::json j;
        j["lap_times"] = r.lap_times;
        j["median_lap"] = r.median_lap;
        j["dnf"] = r.dnf;
        j["collisions"] = r.collisions;
        j["attempts"] = laps;
        j["eval_seed"] = eval_seed;
        write_file(out, j.dump(2) + "\n");
    }
    return 0;
}

int cmd_critic_slice(const CommonOpts& co, const std::string& run_dir, std::string ckpt,
                     double throttle, const std::string& out) {
    CommonOpts eff = co;
    if (eff.config_file.empty() && !run_dir.empty())
        eff.config_file = run_dir + "/config.txt";
    RunConfig cfg = build_config(eff);
    if (ckpt.empty()) {
        if (run_dir.empty())
            throw std::runtime_error("critic-slice needs --run or --ckpt");
        ckpt = run_dir + "/ckpt_final";
    }
    std::vector<ParamSet> critics;
    for (int k = 0; k < cfg.sac.n_critics; ++k)
        critics.push_back(load_params(ckpt + "/critic" + std::to_string(k) + ".flpw"));
    ParamSet frozen;
    const ParamSet* fz = nullptr;
    if (!cfg.state_based && !cfg.no_pretrain) {
        frozen = load_params(cfg.encoder_file);
        fz = &frozen;
    }
    const std::string csv = critic_slice_csv(cfg, critics, fz, (float)throttle);
    if (out.empty())
        std::fputs(csv.c_str(), stdout);
    else
        write_file(out, csv);
    return 0;
}

int cmd_report(const std::string& run_dir) {
    std::ifstream in(run_dir + "/laps.csv");
    if (!in) throw std::runtime_error("no laps.csv in " + run_dir);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::vector<LapRecord> laps = laps_from_csv(ss.str());
    const RunSummary s = summarize_laps(laps);
    std::printf("report: %d laps\n", s.laps_completed);
    for (const auto& l : laps)
        std::printf("  lap %2d  %7.2f s  %d collisions  %d stuck  @step %llu\n",
                    l.lap_index, l.lap_time, l.collisions, l.stuck_events,
                    (unsigned long long)l.env_step);
    if (s.laps_completed > 0) {
        std::printf("report: best %.2f s, median %.2f s, last5 median %.2f s\n",
                    s.best_lap, s.median_lap, s.median_last5);
        std::printf("report: first lap at %.1f s sim time, %d total collisions, "
                    "last5 collision median %.1f\n",
                    s.time_to_first_lap, s.total_collisions, s.collisions_last5_median);
    }
    std::ifstream sj(run_dir + "/summary.json");
    if (sj) {
        nlohmann::json j;
        sj >> j;
        if (j.contains("run") && j["run"].contains("demo_lap_time")) {
            const double demo = j["run"]["demo_lap_time"];
            if (s.laps_completed > 0 && demo > 0)
                std::printf("report: best/demo ratio %.3f (demo %.2f s)\n",
                            s.best_lap / demo, demo);
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"high-speed lap practice: demo, pretrain, train, evaluate"};
    app.require_subcommand(1);

    CommonOpts co_gen, co_pre, co_demo, co_train, co_eval, co_slice;
    std::string gen_out, pre_data, pre_out, demo_out, train_out;
    std::string eval_run, eval_params, eval_out;
    std::string slice_run, slice_ckpt, slice_out, report_run;
    int eval_laps = 0;
    uint64_t eval_seed = 0;
    double slice_throttle = 0.0;

    auto* gen = app.add_subcommand("gen-prior", "scripted low-speed dataset over random maps");
    add_common(gen, co_gen);
    gen->add_option("--out", gen_out, "output dataset directory")->required();

    auto* pre = app.add_subcommand("pretrain", "offline goal-conditioned encoder pretraining");
    add_common(pre, co_pre);
    pre->add_option("--data", pre_data, "prior dataset directory")->required();
    pre->add_option("--out", pre_out, "encoder output file (.flpw)")->required();

    auto* demo = app.add_subcommand("demo-lap", "record the slow scripted demonstration lap");
    add_common(demo, co_demo);
    demo->add_option("--out", demo_out, "demo bundle directory")->required();

    auto* train = app.add_subcommand("train", "autonomous practicing run");
    add_common(train, co_train);
    train->add_option("--out", train_out, "output directory (overrides config out_dir)");

    auto* ev = app.add_subcommand("eval", "deterministic lap attempts from a snapshot");
    add_common(ev, co_eval);
    ev->add_option("--run", eval_run, "training output directory")->required();
    ev->add_option("--params", eval_params, "policy file (default: run's actor_final.flpw)");
    ev->add_option("--laps", eval_laps, "attempts (default: config eval.laps)");
    auto* seed_opt = ev->add_option("--seed", eval_seed, "evaluation seed");
    ev->add_option("--out", eval_out, "write results json here");

    auto* slice = app.add_subcommand("critic-slice", "ensemble-mean Q over steering sweep");
    add_common(slice, co_slice);
    slice->add_option("--run", slice_run, "training output directory");
    slice->add_option("--ckpt", slice_ckpt, "checkpoint directory (overrides --run)");
    slice->add_option("--throttle", slice_throttle, "normalized throttle, [-1,1]");
    slice->add_option("--out", slice_out, "write csv here (default: stdout)");

    auto* rep = app.add_subcommand("report", "recompute lap summary from a run directory");
    rep->add_option("--run", report_run, "training output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_prior(co_gen, gen_out);
        if (pre->parsed()) return cmd_pretrain(co_pre, pre_data, pre_out);
        if (demo->parsed()) return cmd_demo_lap(co_demo, demo_out);
        if (train->parsed()) return cmd_train(co_train, train_out);
        if (ev->parsed())
            return cmd_eval(co_eval, eval_run, eval_params, eval_laps, eval_seed,
                            seed_opt->count() > 0, eval_out);
        if (slice->parsed())
            return cmd_critic_slice(co_slice, slice_run, slice_ckpt, slice_throttle,
                                    slice_out);
        if (rep->parsed()) return cmd_report(report_run);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
