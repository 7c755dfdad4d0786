#include "autolap/run.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "autolap/bytes.hpp"
#include "autolap/ekf.hpp"
#include "autolap/link.hpp"

namespace autolap {

double median_of(std::vector<double> v) {
    if (v.empty()) return -1.0;
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string laps_to_csv(const std::vector<LapRecord>& laps) {
    std::string out = "lap_index,lap_time,collisions,stuck_events,env_step,sim_time\n";
    char buf[160];
    for (const auto& l : laps) {
        std::snprintf(buf, sizeof(buf), "%d,%.6f,%d,%d,%" PRIu64 ",%.6f\n", l.lap_index,
                      l.lap_time, l.collisions, l.stuck_events, l.env_step, l.sim_time);
        out += buf;
    }
    return out;
}

std::vector<LapRecord> laps_from_csv(const std::string& text) {
    std::vector<LapRecord> laps;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first) {
            first = false;
            continue;  // header
        }
        if (line.empty()) continue;
        LapRecord l;
        unsigned long long step = 0;
        if (std::sscanf(line.c_str(), "%d,%lf,%d,%d,%llu,%lf", &l.lap_index, &l.lap_time,
                        &l.collisions, &l.stuck_events, &step, &l.sim_time) != 6)
            throw std::runtime_error("bad lap csv row: " + line);
        l.env_step = step;
        laps.push_back(l);
    }
    return laps;
}

RunSummary summarize_laps(const std::vector<LapRecord>& laps) {
    RunSummary s;
    s.laps_completed = (int)laps.size();
    if (laps.empty()) return s;
    std::vector<double> times, last5, coll5;
    for (const auto& l : laps) {
        times.push_back(l.lap_time);
        s.total_collisions += l.collisions;
    }
    const size_t tail = laps.size() > 5 ? laps.size() - 5 : 0;
    for (size_t i = tail; i < laps.size(); ++i) {
        last5.push_back(laps[i].lap_time);
        coll5.push_back((double)laps[i].collisions);
    }
    s.best_lap = *std::min_element(times.begin(), times.end());
    s.median_lap = median_of(times);
    s.median_last5 = median_of(last5);
    s.collisions_last5_median = median_of(coll5);
    s.time_to_first_lap = laps.front().sim_time;
    return s;
}

void write_running_min_svg(const std::string& path, const std::vector<LapRecord>& laps) {
    const int W = 640, H = 360, M = 40;
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << W << " " << H
        << "\">\n<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    out << "<line x1=\"" << M << "\" y1=\"" << H - M << "\" x2=\"" << W - M << "\" y2=\""
        << H - M << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << M << "\" y1=\"" << M << "\" x2=\"" << M << "\" y2=\"" << H - M
        << "\" stroke=\"black\"/>\n";
    if (!laps.empty()) {
        std::vector<std::pair<double, double>> pts;  // env_step, running min
        double mn = 1e18;
        for (const auto& l : laps) {
            mn = std::min(mn, l.lap_time);
            pts.push_back({(double)l.env_step, mn});
        }
        double xmax = pts.back().first, ymax = 0;
        for (const auto& p : pts) ymax = std::max(ymax, p.second);
        xmax = std::max(xmax, 1.0);
        ymax = std::max(ymax, 1e-9);
        out << "<polyline fill=\"none\" stroke=\"#c0392b\" stroke-width=\"2\" points=\"";
        for (const auto& p : pts) {
            const double x = M + p.first / xmax * (W - 2 * M);
            const double y = H - M - p.second / ymax * (H - 2 * M);
            out << (int)x << "," << (int)y << " ";
        }
        out << "\"/>\n";
        char lbl[96];
        std::snprintf(lbl, sizeof(lbl),
                      "<text x=\"%d\" y=\"%d\" font-size=\"12\">best %.2f s</text>\n", M + 6,
                      M + 14, pts.back().second);
        out << lbl;
        std::snprintf(lbl, sizeof(lbl),
                      "<text x=\"%d\" y=\"%d\" font-size=\"12\">env steps to %.0f</text>\n",
                      W / 2 - 40, H - M + 24, xmax);
        out << lbl;
    }
    out << "</svg>\n";
    std::ofstream f(path);
    f << out.str();
}

namespace {

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    f << text;
    if (!f) throw std::runtime_error("cannot write: " + path);
}

// Robot-side control loop: truth dynamics plus the sensor stack the policy
// actually sees (noisy wheel/gyro/accel, heading filter, smoothed position).
class Robot {
public:
    Robot(const RunConfig& cfg, const CourseMap& cm, const Course& course, uint64_t seed,
          uint64_t stream_index, bool stochastic)
        : cfg_(cfg),
          cm_(cm),
          ncfg_(cfg.net),
          rp_(cfg.raster()),
          fsm_(course, cfg.reward, Rng::substream(seed, "recovery", stream_index),
               cfg.ranges.steer_max, !cfg.no_pseudo_resets),
          act_rng_(Rng::substream(seed, "robot-act", stream_index)),
          sensor_rng_(Rng::substream(seed, "sensors", stream_index)),
          stochastic_(stochastic) {
        truth_.position = cm.start_pos;
        truth_.heading = cm.start_heading;
        if (!cfg.state_based) raster_ = initial_raster(truth_, cm.map, rp_);
        pos_belief_ = truth_.position;
        ekf_.heading_est = truth_.heading;  // start-line heading is known
        ekf_.variance = 0.1;
        est_ = truth_;
    }

    void set_policy(ParamSet ps) { policy_ = std::move(ps); }
    void set_frozen_encoder(const ParamSet* enc) { frozen_enc_ = enc; }
    uint64_t policy_version() const { return policy_.version; }

    struct Outcome {
        bool recorded = false;
        TransitionRecord rec;
        PracticingFsm::PostStep post;
        bool collided = false;
    };

    // One control step; `now` is the pre-step sim clock.
    Outcome step(double now) {
        Outcome out;
        const double t_next = now + cfg_.dyn.dt;
        if (fsm_.mode() == PracticeMode::Recovering) {
            const Action act = fsm_.recovery_action(now);
            out.collided = apply(act);
            out.post = fsm_.post_step(est_, t_next, true);
            prev_ = normalize_action(act, cfg_.ranges);
            return out;
        }
        std::vector<float> wire_feat = wire_features();
        const std::vector<float>& act_feat =
            cfg_.no_pretrain ? policy_features() : wire_feat;
        const std::array<float, 9> prop = make_proprio(est_);
        const RelativeGoal rg = relative_goal(est_, fsm_.active_checkpoint());
        const std::array<float, 3> goal{(float)rg.unit_dir.x, (float)rg.unit_dir.y,
                                        (float)rg.distance};
        const std::array<float, 2> a_norm = policy_act(policy_, ncfg_, act_feat, prop,
                                                       goal, prev_, stochastic_, &act_rng_);
        const uint64_t step_idx = env_step_;
        out.collided = apply(denormalize_action(a_norm, cfg_.ranges));
        out.post = fsm_.post_step(est_, t_next, true);
        out.recorded = true;
        out.rec.features = std::move(wire_feat);
        out.rec.proprio = prop;
        out.rec.goal = goal;
        out.rec.prev_action = prev_;
        out.rec.action = a_norm;
        out.rec.reward = (float)out.post.reward;
        out.rec.done = out.post.done ? 1 : 0;
        out.rec.step = step_idx;
        prev_ = a_norm;
        return out;
    }

    uint64_t env_step() const { return env_step_; }
    const PracticingFsm& fsm() const { return fsm_; }
    const CarState& truth() const { return truth_; }
    const CarState& estimate() const { return est_; }

private:
    bool apply(const Action& act) {
        const StepResult res = step_dynamics(truth_, act, cm_.map, cfg_.dyn);
        truth_ = res.state;
        if (!cfg_.state_based) push_frame(raster_, render_frame(truth_, cm_.map, rp_));
        read_sensors();
        ++env_step_;
        return res.collided;
    }

    void read_sensors() {
        const double speed_meas = truth_.speed + sensor_rng_.normal(0, cfg_.wheel_noise);
        const double gyro = truth_.yaw_rate + sensor_rng_.normal(0, cfg_.gyro_noise);
        const Vec2 vel_world =
            Vec2{std::cos(truth_.heading), std::sin(truth_.heading)} * truth_.speed;
        const Vec2 vel_meas{vel_world.x + sensor_rng_.normal(0, cfg_.vel_noise),
                            vel_world.y + sensor_rng_.normal(0, cfg_.vel_noise)};
        ekf_ = ekf_predict(ekf_, gyro, cfg_.dyn.dt, cfg_.ekf.process);
        ekf_ = ekf_update(ekf_, speed_meas, vel_meas, cfg_.ekf.meas);
        const Vec2 pos_meas{
            truth_.position.x + sensor_rng_.normal(0, cfg_.position_noise),
            truth_.position.y + sensor_rng_.normal(0, cfg_.position_noise)};
        pos_belief_ += (pos_meas - pos_belief_) * cfg_.pos_filter_alpha;
        est_.position = pos_belief_;
        est_.heading = ekf_.heading_est;
        est_.speed = speed_meas;
        est_.yaw_rate = gyro;
        est_.lateral_accel =
            truth_.lateral_accel + sensor_rng_.normal(0, cfg_.accel_noise);
        est_.linear_accel = {
            truth_.linear_accel.x + sensor_rng_.normal(0, cfg_.accel_noise),
            truth_.linear_accel.y + sensor_rng_.normal(0, cfg_.accel_noise)};
    }

    std::vector<float> wire_features() const {
        if (cfg_.state_based) return state_features(truth_, cm_.map);
        if (cfg_.no_pretrain) return flatten_raster(raster_);
        return encode_features(*frozen_enc_, raster_, ncfg_);
    }
    // When the encoder trains online the published snapshot carries it, and
    // the robot re-encodes locally for acting only.
    std::vector<float> policy_features() const {
        return encode_features(policy_, raster_, ncfg_);
    }

    const RunConfig& cfg_;
    const CourseMap& cm_;
    NetConfig ncfg_;
    RasterParams rp_;
    CarState truth_, est_;
    EgoRaster raster_;
    EkfState ekf_;
    Vec2 pos_belief_;
    std::array<float, 2> prev_{-1.0f, 0.0f};
    PracticingFsm fsm_;
    ParamSet policy_;
    const ParamSet* frozen_enc_ = nullptr;
    Rng act_rng_, sensor_rng_;
    bool stochastic_ = true;
    uint64_t env_step_ = 0;
};

// Unacked-record queue with drop-oldest overflow; batches resend everything
// outstanding so a lost frame only costs latency.
struct RobotComms {
    std::deque<TransitionRecord> unacked;
    size_t wire_flen = 0;
    size_t cap = 10000;
    uint64_t dropped = 0;
    int since_flush = 0;

    void push(TransitionRecord rec) {
        unacked.push_back(std::move(rec));
        ++since_flush;
        while (unacked.size() > cap) {
            unacked.pop_front();
            ++dropped;
        }
    }
    Frame make_batch() {
        Frame f;
        f.type = MsgType::TransitionBatch;
        std::vector<TransitionRecord> recs(unacked.begin(), unacked.end());
        f.payload = encode_transition_batch(recs, wire_flen);
        since_flush = 0;
        return f;
    }
    void on_ack(uint64_t step) {
        while (!unacked.empty() && unacked.front().step <= step) unacked.pop_front();
    }
};

// Learner-side frame pump: ingest batches, ack the highest step seen.
struct LearnerHub {
    SacLearner* learner = nullptr;
    size_t wire_flen = 0;
    uint64_t bad_frames = 0, batches = 0, hellos = 0, heartbeats = 0;

    void handle(LinkEndpoint& ep, double now) {
        for (Frame& f : ep.poll(now)) {
            switch (f.type) {
                case MsgType::TransitionBatch: {
                    auto recs = decode_transition_batch(f.payload, wire_flen);
                    if (!recs || recs->empty()) {
                        ++bad_frames;
                        break;
                    }
                    learner->ingest_batch(*recs);
                    uint64_t mx = 0;
                    for (const auto& r : *recs) mx = std::max(mx, r.step);
                    Frame ack;
                    ack.type = MsgType::Ack;
                    put_u64(ack.payload, mx);
                    ep.send_frame(ack, now);
                    ++batches;
                    break;
                }
                case MsgType::Hello:
                    ++hellos;
                    break;
                case MsgType::Heartbeat:
                    ++heartbeats;
                    break;
                default:
                    break;
            }
        }
    }
};

std::vector<TransitionRecord> featurize_demo(const LoadedDemo& b, const RunConfig& cfg,
                                             const ParamSet* frozen) {
    std::vector<TransitionRecord> recs;
    const NetConfig& ncfg = cfg.net;
    recs.reserve(b.demo.traj.steps.size());
    for (size_t i = 0; i < b.demo.traj.steps.size(); ++i) {
        const PriorStep& s = b.demo.traj.steps[i];
        TransitionRecord t;
        if (cfg.state_based) {
            CarState cs;
            cs.position = s.position;
            cs.heading = s.heading;
            t.features = state_features(cs, b.cm.map);
        } else if (s.pixels.size() !=
                   (size_t)(ncfg.frames * ncfg.raster_w * ncfg.raster_h)) {
            throw std::runtime_error("demo raster does not match net.raster config");
        } else if (cfg.no_pretrain) {
            t.features = s.pixels;
        } else {
            EgoRaster r;
            r.width = ncfg.raster_w;
            r.height = ncfg.raster_h;
            r.frames = s.pixels;
            t.features = encode_features(*frozen, r, ncfg);
        }
        t.proprio = s.proprio;
        t.goal = b.demo.goals[i];
        t.prev_action = s.prev_action;
        t.action = s.action;
        t.reward = i < b.demo.rewards.size() ? b.demo.rewards[i] : 0.0f;
        t.done = 0;
        t.step = i;
        recs.push_back(std::move(t));
    }
    return recs;
}

// Per-step robot bookkeeping shared by the loopback and tcp transports.
class RobotDriver {
public:
    RobotDriver(const RunConfig& cfg, const CourseMap& cm, const Course& course,
                ParamSet policy0, const ParamSet* frozen)
        : cfg_(cfg), robot_(cfg, cm, course, cfg.seed, 0, true) {
        robot_.set_policy(std::move(policy0));
        robot_.set_frozen_encoder(frozen);
        comms_.wire_flen = (size_t)cfg.wire_feature_len();
        comms_.cap = cfg.robot_buffer_cap;
        telemetry_.open(cfg.out_dir + "/telemetry.csv");
        telemetry_ << "env_step,sim_time,x,y,speed,reward,mode,checkpoint,laps,"
                      "collisions,stuck_time\n";
    }

    bool done() const {
        if (cfg_.stop_on_first_lap && !laps_.empty()) return true;
        return robot_.env_step() >= cfg_.step_budget;
    }
    double sim_time() const { return (double)robot_.env_step() * cfg_.dyn.dt; }

    void step(LinkEndpoint& ep) {
        const double now = sim_time();
        for (Frame& f : ep.poll(now)) handle_frame(std::move(f));
        Robot::Outcome out = robot_.step(now);
        const double t2 = sim_time();
        if (out.collided) ++collisions_;
        if (out.recorded) {
            comms_.push(std::move(out.rec));
            if (comms_.since_flush >= cfg_.flush_every)
                ep.send_frame(comms_.make_batch(), t2);
        }
        if (t2 >= next_hb_) {
            Frame hb;
            hb.type = MsgType::Heartbeat;
            put_u64(hb.payload, robot_.env_step());
            ep.send_frame(hb, t2);
            next_hb_ += cfg_.heartbeat_every;
        }
        if (out.post.checkpoint.lap_completed) {
            LapRecord lr;
            lr.lap_index = (int)laps_.size() + 1;
            lr.lap_time = out.post.checkpoint.lap_time;
            lr.collisions = out.post.checkpoint.lap_collisions;
            lr.stuck_events = robot_.fsm().stuck_events() - stuck_events_at_lap_;
            stuck_events_at_lap_ = robot_.fsm().stuck_events();
            lr.env_step = robot_.env_step();
            lr.sim_time = t2;
            laps_.push_back(lr);
        }
        if (robot_.env_step() == 20000) stuck_at_20k_ = robot_.fsm().stuck_time();
        if (cfg_.telemetry_stride > 0 &&
            robot_.env_step() % (uint64_t)cfg_.telemetry_stride == 0)
            write_telemetry(t2, out);
    }

    void send_hello(LinkEndpoint& ep) {
        Frame h;
        h.type = MsgType::Hello;
        ep.send_frame(h, sim_time());
    }

    const std::vector<LapRecord>& laps() const { return laps_; }
    const Robot& robot() const { return robot_; }
    const RobotComms& comms() const { return comms_; }
    double stuck_at_20k() const { return stuck_at_20k_; }
    int collisions() const { return collisions_; }
    uint64_t param_updates_applied() const { return param_updates_; }

private:
    void handle_frame(Frame f) {
        if (f.type == MsgType::ParamUpdate) {
            try {
                ParamSet ps = parse_params(f.payload);
                // applied atomically between control steps, never mid-step
                if (ps.version > robot_.policy_version()) {
                    robot_.set_policy(std::move(ps));
                    ++param_updates_;
                }
            } catch (const std::exception&) {
                ++bad_frames_;
            }
        } else if (f.type == MsgType::Ack && f.payload.size() == 8) {
            ByteReader r(f.payload.data(), 8);
            uint64_t s = 0;
            r.u64(s);
            comms_.on_ack(s);
        }
    }

    void write_telemetry(double t, const Robot::Outcome& out) {
        char buf[256];
        std::snprintf(buf, sizeof(buf),
                      "%" PRIu64 ",%.3f,%.4f,%.4f,%.4f,%.5f,%c,%d,%d,%d,%.3f\n",
                      robot_.env_step(), t, robot_.truth().position.x,
                      robot_.truth().position.y, robot_.truth().speed, out.post.reward,
                      robot_.fsm().mode() == PracticeMode::Recovering ? 'R' : 'P',
                      robot_.fsm().state().active_checkpoint_index,
                      robot_.fsm().state().laps_completed, collisions_,
                      robot_.fsm().stuck_time());
        telemetry_ << buf;
    }

    const RunConfig& cfg_;
    Robot robot_;
    RobotComms comms_;
    std::ofstream telemetry_;
    std::vector<LapRecord> laps_;
    double next_hb_ = 0.0;
    double stuck_at_20k_ = -1.0;
    int collisions_ = 0;
    int stuck_events_at_lap_ = 0;
    uint64_t param_updates_ = 0, bad_frames_ = 0;
};

std::string summary_json_text(const RunSummary& s) {
    nlohmann::json j;
    j["laps_completed"] = s.laps_completed;
    j["best_lap"] = s.best_lap;
    j["median_lap"] = s.median_lap;
    j["median_last5"] = s.median_last5;
    j["collisions_last5_median"] = s.collisions_last5_median;
    j["total_collisions"] = s.total_collisions;
    j["time_to_first_lap"] = s.time_to_first_lap;
    return j.dump(2);
}

}  // namespace

TrainResult run_training(const RunConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    save_config(cfg.out_dir + "/config.txt", cfg);

    if (cfg.demo_dir.empty())
        throw std::runtime_error("demo_dir must point at a demo-lap bundle");
    LoadedDemo bundle = load_demo(cfg.demo_dir);
    const CourseMap& cm = bundle.cm;
    const Course& course = bundle.demo.course;

    NetConfig ncfg = cfg.net;
    LearnerConfig lcfg = cfg.sac;
    lcfg.demo_mixing = !cfg.no_demo;
    lcfg.train_encoder = cfg.no_pretrain && !cfg.state_based;

    ParamSet enc;
    std::optional<ParamSet> frozen;
    if (cfg.state_based) {
        // privileged features, no encoder anywhere
    } else if (cfg.no_pretrain) {
        Rng er = Rng::substream(cfg.seed, "enc-init");
        enc = make_encoder_params(ncfg, er);
    } else {
        if (cfg.encoder_file.empty())
            throw std::runtime_error(
                "encoder_file required unless no_pretrain or state_based is set");
        enc = load_params(cfg.encoder_file);
        frozen = enc;
    }

    SacLearner learner(ncfg, lcfg, enc, cfg.seed);
    if (!cfg.resume_from.empty()) learner.load_checkpoint(cfg.resume_from);
    if (!cfg.no_demo)
        learner.add_demo(featurize_demo(bundle, cfg, frozen ? &*frozen : nullptr));

    // initial policy is flashed onto the robot at deploy time; every later
    // update arrives over the wire
    RobotDriver driver(cfg, cm, course, learner.make_snapshot(),
                       frozen ? &*frozen : nullptr);
    LearnerHub hub;
    hub.learner = &learner;
    hub.wire_flen = (size_t)cfg.wire_feature_len();

    std::ofstream learner_csv(cfg.out_dir + "/learner.csv");
    learner_csv << "updates,critic_loss,actor_loss,alpha,target_entropy,online,demo,"
                   "publish_version\n";
    auto log_learner = [&]() {
        const auto st = learner.stats();
        char buf[200];
        std::snprintf(buf, sizeof(buf), "%" PRIu64 ",%.6f,%.6f,%.6f,%.4f,%zu,%zu,%" PRIu64 "\n",
                      st.updates, st.critic_loss, st.actor_loss, st.alpha,
                      st.target_entropy, st.online_size, st.demo_size,
                      st.publish_version);
        learner_csv << buf;
    };

    using clock = std::chrono::steady_clock;
    double train_secs = 0.0;
    uint64_t next_ckpt = cfg.checkpoint_every;

    if (cfg.link == "loopback") {
        LoopbackLink link(cfg.link_latency);
        driver.send_hello(link.robot_end());
        while (!driver.done()) {
            driver.step(link.robot_end());
            const double now = driver.sim_time();
            hub.handle(link.learner_end(), now);
            const auto u0 = clock::now();
            learner.run_pending();
            train_secs += std::chrono::duration<double>(clock::now() - u0).count();
            if (learner.publish_due()) {
                Frame f;
                f.type = MsgType::ParamUpdate;
                f.payload = serialize_params(learner.make_snapshot());
                link.learner_end().send_frame(f, now);
                log_learner();
            }
            if (next_ckpt > 0 && driver.robot().env_step() >= next_ckpt) {
                learner.save_checkpoint(cfg.out_dir + "/ckpt_" +
                                        std::to_string(driver.robot().env_step()));
                next_ckpt += cfg.checkpoint_every;
            }
        }
    } else if (cfg.link == "tcp") {
        TcpListener listener((uint16_t)cfg.tcp_port);
        std::atomic<bool> stop{false};
        std::thread learner_thread([&] {
            auto ep = listener.accept_one();
            while (!stop.load(std::memory_order_relaxed)) {
                hub.handle(*ep, 0.0);
                const auto u0 = clock::now();
                const int n = learner.run_pending(64);
                train_secs += std::chrono::duration<double>(clock::now() - u0).count();
                if (learner.publish_due()) {
                    Frame f;
                    f.type = MsgType::ParamUpdate;
                    f.payload = serialize_params(learner.make_snapshot());
                    ep->send_frame(f, 0.0);
                    log_learner();
                }
                if (n == 0) std::this_thread::sleep_for(std::chrono::milliseconds(1));
            }
            hub.handle(*ep, 0.0);  // drain what is already buffered
        });
        auto ep = tcp_connect("127.0.0.1", listener.port());
        driver.send_hello(*ep);
        while (!driver.done()) driver.step(*ep);
        stop.store(true);
        learner_thread.join();
    } else {
        throw std::runtime_error("unknown link type: " + cfg.link);
    }

    TrainResult res;
    res.laps = driver.laps();
    res.summary = summarize_laps(res.laps);
    res.stuck_time_at_20k = driver.stuck_at_20k();
    res.stuck_time_total = driver.robot().fsm().stuck_time();
    res.stuck_events_total = driver.robot().fsm().stuck_events();
    res.dropped_records = driver.comms().dropped;
    res.env_steps = driver.robot().env_step();
    res.sim_time = driver.sim_time();
    res.learner = learner.stats();
    res.updates_per_sec =
        train_secs > 0 ? (double)res.learner.updates / train_secs : 0.0;
    res.final_snapshot = learner.make_snapshot();

    write_text(cfg.out_dir + "/laps.csv", laps_to_csv(res.laps));
    {
        std::string rm = "lap_index,env_step,best_so_far\n";
        double mn = 1e18;
        char buf[96];
        for (const auto& l : res.laps) {
            mn = std::min(mn, l.lap_time);
            std::snprintf(buf, sizeof(buf), "%d,%" PRIu64 ",%.6f\n", l.lap_index,
                          l.env_step, mn);
            rm += buf;
        }
        write_text(cfg.out_dir + "/running_min.csv", rm);
    }
    write_running_min_svg(cfg.out_dir + "/running_min.svg", res.laps);

    nlohmann::json j;
    j["summary"] = nlohmann::json::parse(summary_json_text(res.summary));
    j["run"]["seed"] = cfg.seed;
    j["run"]["env_steps"] = res.env_steps;
    j["run"]["sim_time"] = res.sim_time;
    j["run"]["stuck_time_total"] = res.stuck_time_total;
    j["run"]["stuck_time_at_20k"] = res.stuck_time_at_20k;
    j["run"]["stuck_events_total"] = res.stuck_events_total;
    j["run"]["dropped_records"] = res.dropped_records;
    j["run"]["duplicate_records"] = res.learner.duplicates;
    j["run"]["updates"] = res.learner.updates;
    j["run"]["updates_per_sec"] = res.updates_per_sec;
    j["run"]["publish_version"] = res.learner.publish_version;
    j["run"]["param_updates_applied"] = driver.param_updates_applied();
    j["run"]["demo_lap_time"] = bundle.demo.lap_time;
    write_text(cfg.out_dir + "/summary.json", j.dump(2) + "\n");

    learner.save_checkpoint(cfg.out_dir + "/ckpt_final");
    save_params(cfg.out_dir + "/actor_final.flpw", res.final_snapshot);
    return res;
}

EvalResult evaluate_policy(const RunConfig& cfg, const ParamSet& snapshot,
                           const ParamSet* frozen_encoder, int n_laps,
                           uint64_t eval_seed) {
    LoadedDemo bundle = load_demo(cfg.demo_dir);
    EvalResult res;
    const uint64_t max_steps = (uint64_t)(cfg.eval_lap_timeout / cfg.dyn.dt);
    for (int attempt = 0; attempt < n_laps; ++attempt) {
        Robot rb(cfg, bundle.cm, bundle.demo.course, eval_seed,
                 (uint64_t)attempt + 1, false);
        rb.set_policy(snapshot);
        rb.set_frozen_encoder(frozen_encoder);
        bool completed = false;
        for (uint64_t k = 0; k < max_steps; ++k) {
            const double t = (double)k * cfg.dyn.dt;
            Robot::Outcome out = rb.step(t);
            if (out.collided) ++res.collisions;
            if (out.post.checkpoint.lap_completed) {
                res.lap_times.push_back(out.post.checkpoint.lap_time);
                completed = true;
                break;
            }
        }
        if (!completed) ++res.dnf;
    }
    res.median_lap = median_of(res.lap_times);
    return res;
}

std::string critic_slice_csv(const RunConfig& cfg, const std::vector<ParamSet>& critics,
                             const ParamSet* frozen_encoder, float throttle_norm) {
    const NetConfig& ncfg = cfg.net;
    CourseMap cm = generate_course(cfg.course_seed);
    CarState start;
    start.position = cm.start_pos;
    start.heading = cm.start_heading;

    std::vector<float> feat;
    if (cfg.state_based) {
        feat = state_features(start, cm.map);
    } else {
        EgoRaster r = initial_raster(start, cm.map, cfg.raster());
        if (frozen_encoder)
            feat = encode_features(*frozen_encoder, r, ncfg);
        else
            feat = flatten_raster(r);
    }

    const int n = 21;
    Tensor features({n, (int)feat.size()});
    for (int i = 0; i < n; ++i)
        std::copy(feat.begin(), feat.end(),
                  features.data.begin() + (size_t)i * feat.size());
    Tensor aux({n, ncfg.critic_aux_in()});
    const std::array<float, 9> prop = make_proprio(start);
    for (int i = 0; i < n; ++i) {
        float* a = aux.data.data() + (size_t)i * ncfg.critic_aux_in();
        std::copy(prop.begin(), prop.end(), a);
        a[9] = 1.0f;  // goal dead ahead, 5 m out
        a[10] = 0.0f;
        a[11] = 5.0f;
        a[12] = -1.0f;  // prev action: slowest, centered
        a[13] = 0.0f;
        a[14] = throttle_norm;
        a[15] = -1.0f + 2.0f * (float)i / (float)(n - 1);
    }
    std::vector<const ParamSet*> cps;
    for (const auto& c : critics) cps.push_back(&c);
    const std::vector<float> q = eval_critics(ncfg, cps, features, aux, false);

    std::string out = "steering,q_mean\n";
    char buf[64];
    for (int i = 0; i < n; ++i) {
        std::snprintf(buf, sizeof(buf), "%.2f,%.6f\n",
                      -1.0 + 2.0 * (double)i / (double)(n - 1), (double)q[(size_t)i]);
        out += buf;
    }
    return out;
}

}  // namespace autolap
