#include "autolap/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace autolap {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw std::runtime_error("not a boolean: " + v);
}

double parse_num(const std::string& v) {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::runtime_error("trailing junk in number: " + v);
    return d;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
std::string fmt(float v) { return fmt((double)v); }
std::string fmt(int v) { return std::to_string(v); }
std::string fmt(uint64_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "1" : "0"; }
std::string fmt(const std::string& v) { return v; }

// Key table shared by the setter and the dumper so they can never drift.
struct KeyEntry {
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <class T, class F>
KeyEntry entry(F field) {
    return {
        [field](RunConfig& c, const std::string& v) {
            if constexpr (std::is_same_v<T, bool>)
                field(c) = parse_bool(v);
            else if constexpr (std::is_same_v<T, std::string>)
                field(c) = v;
            else
                field(c) = (T)parse_num(v);
        },
        [field](const RunConfig& c) { return fmt(field(const_cast<RunConfig&>(c))); },
    };
}

#define KEY(T, expr) \
    entry<T>([](RunConfig& c) -> T& { return expr; })

const std::vector<std::pair<std::string, KeyEntry>>& key_table() {
    static const std::vector<std::pair<std::string, KeyEntry>> table = {
        {"seed", KEY(uint64_t, c.seed)},
        {"out_dir", KEY(std::string, c.out_dir)},
        {"step_budget", KEY(uint64_t, c.step_budget)},
        {"stop_on_first_lap", KEY(bool, c.stop_on_first_lap)},
        {"course_seed", KEY(uint64_t, c.course_seed)},
        {"n_checkpoints", KEY(int, c.n_checkpoints)},
        {"reach_radius", KEY(double, c.reach_radius)},
        {"demo_dir", KEY(std::string, c.demo_dir)},
        {"encoder_file", KEY(std::string, c.encoder_file)},
        {"resume_from", KEY(std::string, c.resume_from)},
        {"no_demo", KEY(bool, c.no_demo)},
        {"no_pretrain", KEY(bool, c.no_pretrain)},
        {"no_pseudo_resets", KEY(bool, c.no_pseudo_resets)},
        {"state_based", KEY(bool, c.state_based)},
        {"link", KEY(std::string, c.link)},
        {"link_latency", KEY(double, c.link_latency)},
        {"tcp_port", KEY(int, c.tcp_port)},
        {"flush_every", KEY(int, c.flush_every)},
        {"robot_buffer_cap", KEY(size_t, c.robot_buffer_cap)},
        {"heartbeat_every", KEY(double, c.heartbeat_every)},
        {"telemetry_stride", KEY(int, c.telemetry_stride)},
        {"checkpoint_every", KEY(uint64_t, c.checkpoint_every)},
        {"sensors.position_noise", KEY(double, c.position_noise)},
        {"sensors.wheel_noise", KEY(double, c.wheel_noise)},
        {"sensors.gyro_noise", KEY(double, c.gyro_noise)},
        {"sensors.accel_noise", KEY(double, c.accel_noise)},
        {"sensors.vel_noise", KEY(double, c.vel_noise)},
        {"sensors.pos_filter_alpha", KEY(double, c.pos_filter_alpha)},
        {"ekf.process_noise", KEY(double, c.ekf.process)},
        {"ekf.meas_noise", KEY(double, c.ekf.meas)},
        {"eval.n_laps", KEY(int, c.eval_laps)},
        {"eval.lap_timeout", KEY(double, c.eval_lap_timeout)},
        {"prior.n_maps", KEY(int, c.prior_maps)},
        {"prior.steps_per_map", KEY(int, c.prior_steps)},
        {"iql.updates", KEY(int, c.iql_updates)},
        {"net.raster_w", KEY(int, c.net.raster_w)},
        {"net.raster_h", KEY(int, c.net.raster_h)},
        {"net.frames", KEY(int, c.net.frames)},
        {"net.enc_layers", KEY(int, c.net.enc_layers)},
        {"net.enc_channels", KEY(int, c.net.enc_channels)},
        {"net.aux_dim", KEY(int, c.net.aux_dim)},
        {"net.trunk_hidden", KEY(int, c.net.trunk_hidden)},
        {"net.trunk_layers", KEY(int, c.net.trunk_layers)},
        {"net.logstd_min", KEY(float, c.net.logstd_min)},
        {"net.logstd_max", KEY(float, c.net.logstd_max)},
        {"net.squash_delta", KEY(double, c.net.squash_delta)},
        {"sac.gamma", KEY(float, c.sac.gamma)},
        {"sac.lr", KEY(float, c.sac.lr)},
        {"sac.n_critics", KEY(int, c.sac.n_critics)},
        {"sac.m_subset", KEY(int, c.sac.m_subset)},
        {"sac.polyak", KEY(float, c.sac.polyak)},
        {"sac.utd", KEY(int, c.sac.utd)},
        {"sac.batch_size", KEY(int, c.sac.batch_size)},
        {"sac.target_entropy_init", KEY(float, c.sac.target_entropy_init)},
        {"sac.entropy_decay", KEY(float, c.sac.entropy_decay)},
        {"sac.publish_every", KEY(int, c.sac.publish_every)},
        {"sac.replay_capacity", KEY(size_t, c.sac.replay_capacity)},
        {"sac.min_online", KEY(size_t, c.sac.min_online)},
        {"iql.gamma", KEY(float, c.iql.gamma)},
        {"iql.expectile", KEY(float, c.iql.expectile)},
        {"iql.beta", KEY(float, c.iql.beta)},
        {"iql.weight_clip", KEY(float, c.iql.weight_clip)},
        {"iql.lr", KEY(float, c.iql.lr)},
        {"iql.polyak", KEY(float, c.iql.polyak)},
        {"iql.batch_size", KEY(int, c.iql.batch_size)},
        {"iql.offset_max", KEY(int, c.iql.offset_max)},
        {"dyn.dt", KEY(double, c.dyn.dt)},
        {"dyn.wheelbase", KEY(double, c.dyn.wheelbase)},
        {"dyn.speed_tau", KEY(double, c.dyn.speed_tau)},
        {"reward.c_stuck", KEY(double, c.reward.c_stuck_penalty)},
        {"reward.c_collide", KEY(double, c.reward.c_collide)},
        {"reward.accel_threshold", KEY(double, c.reward.accel_threshold)},
        {"ranges.v_min", KEY(double, c.ranges.v_min)},
        {"ranges.v_max", KEY(double, c.ranges.v_max)},
        {"ranges.steer_max", KEY(double, c.ranges.steer_max)},
        {"raster.fov", KEY(double, c.raster_fov)},
        {"raster.max_range", KEY(double, c.raster_max_range)},
    };
    return table;
}

#undef KEY

}  // namespace

bool set_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& [name, e] : key_table()) {
        if (name == key) {
            e.set(cfg, value);
            // single-knob invariants: the accel threshold feeds both the
            // dynamics clamp and the reward penalty; the critic count feeds
            // both the net factory and the learner
            cfg.dyn.accel_threshold = cfg.reward.accel_threshold;
            cfg.net.n_critics = cfg.sac.n_critics;
            cfg.net.state_based = cfg.state_based;
            return true;
        }
    }
    return false;
}

std::string dump_config(const RunConfig& cfg) {
    std::ostringstream out;
    out << "# run configuration (flat key = value, '#' starts a comment)\n";
    for (const auto& [name, e] : key_table())
        out << name << " = " << e.get(cfg) << "\n";
    return out.str();
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(lineno) +
                                     ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (!set_config_key(cfg, key, value))
                throw std::runtime_error("unknown key '" + key + "'");
        } catch (const std::exception& e) {
            throw std::runtime_error("config line " + std::to_string(lineno) + ": " +
                                     e.what());
        }
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

void save_config(const std::string& path, const RunConfig& cfg) {
    std::ofstream out(path);
    out << dump_config(cfg);
    if (!out) throw std::runtime_error("cannot write config: " + path);
}

}  // namespace autolap
