#include "autolap/learner.hpp"

#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace autolap {

BatchTensors assemble_batch(const std::vector<const Transition*>& batch,
                            const NetConfig& ncfg, float gamma, int feat_width) {
    const int B = (int)batch.size();
    const int F = feat_width;
    const int A = ncfg.action_dim;
    const int AUX = ncfg.actor_aux_in();
    BatchTensors bt;
    bt.s_feat = Tensor::zeros({B, F});
    bt.s2_feat = Tensor::zeros({B, F});
    bt.s_aux = Tensor::zeros({B, AUX});
    bt.s2_aux = Tensor::zeros({B, AUX});
    bt.action = Tensor::zeros({B, A});
    bt.s_prev = Tensor::zeros({B, A});
    bt.s2_prev = Tensor::zeros({B, A});
    bt.reward = Tensor::zeros({B, 1});
    bt.mask = Tensor::zeros({B, 1});
    for (int i = 0; i < B; ++i) {
        const Transition& t = *batch[(size_t)i];
        if ((int)t.s_feat.size() != F || (int)t.s2_feat.size() != F)
            throw std::invalid_argument("assemble_batch: record feature width mismatch");
        std::copy_n(t.s_feat.begin(), F, bt.s_feat.data.begin() + (size_t)i * F);
        std::copy_n(t.s2_feat.begin(), F, bt.s2_feat.data.begin() + (size_t)i * F);
        float* a1 = bt.s_aux.data.data() + (size_t)i * AUX;
        float* a2 = bt.s2_aux.data.data() + (size_t)i * AUX;
        std::copy_n(t.s_prop.begin(), 9, a1);
        std::copy_n(t.s_goal.begin(), 3, a1 + 9);
        std::copy_n(t.s_prev.begin(), 2, a1 + 12);
        std::copy_n(t.s2_prop.begin(), 9, a2);
        std::copy_n(t.s2_goal.begin(), 3, a2 + 9);
        std::copy_n(t.s2_prev.begin(), 2, a2 + 12);
        for (int j = 0; j < A; ++j) {
            bt.action.data[(size_t)(i * A + j)] = t.action[(size_t)j];
            bt.s_prev.data[(size_t)(i * A + j)] = t.s_prev[(size_t)j];
            bt.s2_prev.data[(size_t)(i * A + j)] = t.s2_prev[(size_t)j];
        }
        bt.reward.data[(size_t)i] = t.reward;
        bt.mask.data[(size_t)i] = gamma * (1.0f - (float)t.done);
    }
    return bt;
}

SacLearner::SacLearner(const NetConfig& ncfg, const LearnerConfig& lcfg, ParamSet encoder,
                       uint64_t seed)
    : ncfg_(ncfg),
      lcfg_(lcfg),
      encoder_(std::move(encoder)),
      online_(lcfg.replay_capacity),
      demo_(lcfg.replay_capacity),
      stitcher_((size_t)lcfg.record_feature_len(ncfg)),
      demo_stitcher_((size_t)lcfg.record_feature_len(ncfg)),
      rng_(Rng::substream(seed, "sac-learner")) {
    Rng init = Rng::substream(seed, "sac-init");
    actor_ = make_actor_params(ncfg_, init);
    actor_opt_ = Adam(AdamConfig{lcfg_.lr, 0.9f, 0.999f, 1e-8f});
    for (int k = 0; k < lcfg_.n_critics; ++k) {
        critics_.push_back(make_critic_params(ncfg_, k, init));
        targets_.push_back(critics_.back());
        critic_opts_.emplace_back(AdamConfig{lcfg_.lr, 0.9f, 0.999f, 1e-8f});
    }
    if (lcfg_.train_encoder)
        enc_opt_ = std::make_unique<Adam>(AdamConfig{lcfg_.lr, 0.9f, 0.999f, 1e-8f});
}

void SacLearner::add_demo(const std::vector<TransitionRecord>& recs) {
    for (const auto& r : recs)
        for (auto& t : demo_stitcher_.push(r)) demo_.add(std::move(t));
}

size_t SacLearner::ingest(const TransitionRecord& rec) {
    auto ts = stitcher_.push(rec);
    for (auto& t : ts) online_.add(std::move(t));
    pending_ += (uint64_t)lcfg_.utd * ts.size();
    return ts.size();
}

size_t SacLearner::ingest_batch(const std::vector<TransitionRecord>& recs) {
    size_t n = 0;
    for (const auto& r : recs) n += ingest(r);
    return n;
}

bool SacLearner::can_update() const { return online_.size() >= std::max<size_t>(1, lcfg_.min_online); }

int SacLearner::run_pending(int max_updates) {
    int done = 0;
    while (pending_ > 0 && done < max_updates && can_update()) {
        if (!update_once()) break;
        ++done;
    }
    return done;
}

std::vector<int> SacLearner::pick_subset() {
    std::vector<int> idx((size_t)lcfg_.n_critics);
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < lcfg_.m_subset; ++i) {
        int j = (int)rng_.uniform_int(i, lcfg_.n_critics - 1);
        std::swap(idx[(size_t)i], idx[(size_t)j]);
    }
    idx.resize((size_t)lcfg_.m_subset);
    return idx;
}

namespace {

// raw pixel features come in flat; conv wants [B, C, H, W]
int feature_node(Graph& g, const BoundNet<float>* enc, const Tensor& flat,
                 const NetConfig& ncfg) {
    if (!enc) return g.constant(flat);
    const int B = flat.rows();
    int rast = g.reshape(g.constant(flat), {B, ncfg.frames, ncfg.raster_h, ncfg.raster_w});
    return encoder_forward(g, *enc, rast, ncfg);
}

}  // namespace

void SacLearner::critic_update(const BatchTensors& bt) {
    const int B = bt.reward.rows();
    const float a = alpha();

    // Target values: fresh next action from the current actor, subset-min
    // over target critics, entropy correction. Forward only.
    {
        Graph g;
        BoundNet<float> enc_b;
        const BoundNet<float>* ep = nullptr;
        if (lcfg_.train_encoder) {
            enc_b = bind_net(g, encoder_, false);
            ep = &enc_b;
        }
        int feat2 = feature_node(g, ep, bt.s2_feat, ncfg_);
        auto actor_b = bind_net(g, actor_, false);
        int aux2 = g.constant(bt.s2_aux);
        auto dist2 = actor_forward(g, actor_b, feat2, aux2, ncfg_);
        Tensor eps = Tensor::zeros({B, ncfg_.action_dim});
        for (auto& v : eps.data) v = rng_.normal_f();
        auto a2 = sample_squashed(g, dist2, g.constant(eps), g.constant(bt.s2_prev),
                                  ncfg_.squash_delta);
        int caux2 = g.concat_cols({aux2, a2.action});
        int qmin = -1;
        for (int k : pick_subset()) {
            auto tb = bind_net(g, targets_[(size_t)k], false);
            int q = head_forward(g, tb, "critic" + std::to_string(k), feat2, caux2, ncfg_);
            qmin = qmin < 0 ? q : g.minimum(qmin, q);
        }
        int y = g.add(g.constant(bt.reward),
                      g.mul(g.constant(bt.mask), g.sub(qmin, g.mul_scalar(a2.logp, a))));
        last_y_ = g.val(y).data;
    }

    // Every member regresses to the same y; one graph so a trainable encoder
    // accumulates gradient from all members.
    Graph g;
    BoundNet<float> enc_b;
    const BoundNet<float>* ep = nullptr;
    if (lcfg_.train_encoder) {
        enc_b = bind_net(g, encoder_, true);
        ep = &enc_b;
    }
    int feat = feature_node(g, ep, bt.s_feat, ncfg_);
    int caux = g.concat_cols({g.constant(bt.s_aux), g.constant(bt.action)});
    Tensor yt = Tensor::zeros({B, 1});
    yt.data = last_y_;
    int yc = g.constant(yt);
    std::vector<BoundNet<float>> members;
    int loss = -1;
    for (int k = 0; k < lcfg_.n_critics; ++k) {
        members.push_back(bind_net(g, critics_[(size_t)k], true));
        int q = head_forward(g, members.back(), "critic" + std::to_string(k), feat, caux, ncfg_);
        int l = g.mean_all(g.square(g.sub(q, yc)));
        loss = loss < 0 ? l : g.add(loss, l);
    }
    loss = g.mul_scalar(loss, 1.0f / (float)lcfg_.n_critics);
    g.backward(loss);
    last_critic_loss_ = g.val(loss).data[0];
    for (int k = 0; k < lcfg_.n_critics; ++k) {
        auto grads = collect_grads(g, members[(size_t)k]);
        critic_opts_[(size_t)k].step(critics_[(size_t)k], grad_ptrs(grads));
    }
    if (lcfg_.train_encoder) {
        auto eg = collect_grads(g, enc_b);
        enc_opt_->step(encoder_, grad_ptrs(eg));
    }
    for (int k = 0; k < lcfg_.n_critics; ++k)
        polyak_update(targets_[(size_t)k], critics_[(size_t)k], lcfg_.polyak);
}

void SacLearner::actor_and_alpha_update(const BatchTensors& bt) {
    const int B = bt.reward.rows();
    const float a = alpha();

    Graph g;
    BoundNet<float> enc_b;
    const BoundNet<float>* ep = nullptr;
    if (lcfg_.train_encoder) {
        enc_b = bind_net(g, encoder_, false);  // actor gradients never reach the encoder
        ep = &enc_b;
    }
    int feat = feature_node(g, ep, bt.s_feat, ncfg_);
    auto actor_b = bind_net(g, actor_, true);
    int aux = g.constant(bt.s_aux);
    auto dist = actor_forward(g, actor_b, feat, aux, ncfg_);
    Tensor eps = Tensor::zeros({B, ncfg_.action_dim});
    for (auto& v : eps.data) v = rng_.normal_f();
    auto sa = sample_squashed(g, dist, g.constant(eps), g.constant(bt.s_prev),
                              ncfg_.squash_delta);
    int cauxa = g.concat_cols({aux, sa.action});
    int qmin = -1;
    for (int k = 0; k < lcfg_.n_critics; ++k) {
        auto cb = bind_net(g, critics_[(size_t)k], false);
        int q = head_forward(g, cb, "critic" + std::to_string(k), feat, cauxa, ncfg_);
        qmin = qmin < 0 ? q : g.minimum(qmin, q);
    }
    int loss = g.mean_all(g.sub(g.mul_scalar(sa.logp, a), qmin));
    g.backward(loss);
    last_actor_loss_ = g.val(loss).data[0];
    auto grads = collect_grads(g, actor_b);
    actor_opt_.step(actor_, grad_ptrs(grads));

    const Tensor& lp = g.val(sa.logp);
    float mean_logp = 0;
    for (float v : lp.data) mean_logp += v;
    mean_logp /= (float)B;
    last_mean_logp_ = mean_logp;

    // Dual step on log alpha: minimize alpha * (-log pi - target entropy).
    const float target_h = lcfg_.target_entropy(update_count_, ncfg_.action_dim);
    const float grad = std::exp(log_alpha_) * (-mean_logp - target_h);
    ++alpha_t_;
    alpha_m_ = 0.9f * alpha_m_ + 0.1f * grad;
    alpha_v_ = 0.999f * alpha_v_ + 0.001f * grad * grad;
    const float mh = alpha_m_ / (1.0f - std::pow(0.9f, (float)alpha_t_));
    const float vh = alpha_v_ / (1.0f - std::pow(0.999f, (float)alpha_t_));
    log_alpha_ -= lcfg_.lr * mh / (std::sqrt(vh) + 1e-8f);
}

bool SacLearner::update_once() {
    if (!can_update()) return false;
    auto batch = sample_mixed_batch(online_, demo_, lcfg_.batch_size, lcfg_.demo_mixing, rng_);
    BatchTensors bt = assemble_batch(batch, ncfg_, lcfg_.gamma,
                                     lcfg_.record_feature_len(ncfg_));
    critic_update(bt);
    actor_and_alpha_update(bt);
    ++update_count_;
    if (pending_ > 0) --pending_;
    return true;
}

ParamSet SacLearner::make_snapshot() {
    ParamSet out;
    out.absorb(actor_);
    if (lcfg_.train_encoder) out.absorb(encoder_);
    out.version = (uint32_t)++publish_version_;
    last_publish_ = update_count_;
    return out;
}

SacLearner::Stats SacLearner::stats() const {
    Stats s;
    s.updates = update_count_;
    s.critic_loss = last_critic_loss_;
    s.actor_loss = last_actor_loss_;
    s.alpha = std::exp(log_alpha_);
    s.target_entropy = lcfg_.target_entropy(update_count_, ncfg_.action_dim);
    s.mean_logp = last_mean_logp_;
    s.duplicates = stitcher_.duplicates();
    s.online_size = online_.size();
    s.demo_size = demo_.size();
    s.publish_version = publish_version_;
    return s;
}

void SacLearner::save_checkpoint(const std::string& dir) const {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    save_params(dir + "/encoder.flpw", encoder_);
    save_params(dir + "/actor.flpw", actor_);
    for (int k = 0; k < lcfg_.n_critics; ++k) {
        save_params(dir + "/critic" + std::to_string(k) + ".flpw", critics_[(size_t)k]);
        save_params(dir + "/target" + std::to_string(k) + ".flpw", targets_[(size_t)k]);
    }
    nlohmann::json j;
    j["update_count"] = update_count_;
    j["pending"] = pending_;
    j["last_publish"] = last_publish_;
    j["publish_version"] = publish_version_;
    j["log_alpha"] = log_alpha_;
    j["alpha_m"] = alpha_m_;
    j["alpha_v"] = alpha_v_;
    j["alpha_t"] = alpha_t_;
    uint64_t st[4];
    rng_.state(st);
    j["rng"] = {st[0], st[1], st[2], st[3]};
    std::ofstream(dir + "/learner.json") << j.dump(2) << "\n";
}

void SacLearner::load_checkpoint(const std::string& dir) {
    encoder_ = load_params(dir + "/encoder.flpw");
    actor_ = load_params(dir + "/actor.flpw");
    for (int k = 0; k < lcfg_.n_critics; ++k) {
        critics_[(size_t)k] = load_params(dir + "/critic" + std::to_string(k) + ".flpw");
        targets_[(size_t)k] = load_params(dir + "/target" + std::to_string(k) + ".flpw");
    }
    nlohmann::json j;
    std::ifstream in(dir + "/learner.json");
    if (!in) throw std::runtime_error("missing learner.json in " + dir);
    in >> j;
    update_count_ = j["update_count"];
    pending_ = j["pending"];
    last_publish_ = j["last_publish"];
    publish_version_ = j["publish_version"];
    log_alpha_ = j["log_alpha"];
    alpha_m_ = j["alpha_m"];
    alpha_v_ = j["alpha_v"];
    alpha_t_ = j["alpha_t"];
    uint64_t st[4] = {j["rng"][0], j["rng"][1], j["rng"][2], j["rng"][3]};
    rng_.set_state(st);
}

std::vector<float> eval_critics(const NetConfig& ncfg,
                                const std::vector<const ParamSet*>& critics,
                                const Tensor& features, const Tensor& aux_sa,
                                bool take_min) {
    Graph g;
    int feat = g.constant(features);
    int aux = g.constant(aux_sa);
    int acc = -1;
    for (size_t k = 0; k < critics.size(); ++k) {
        auto b = bind_net(g, *critics[k], false);
        // prefix recovered from the member's own names ("critic3/aux/w" -> "critic3")
        const std::string& n0 = critics[k]->names.at(0);
        int q = head_forward(g, b, n0.substr(0, n0.find('/')), feat, aux, ncfg);
        if (acc < 0)
            acc = q;
        else
            acc = take_min ? g.minimum(acc, q) : g.add(acc, q);
    }
    Tensor out = g.val(acc);
    if (!take_min)
        for (auto& v : out.data) v /= (float)critics.size();
    return out.data;
}

}  // namespace autolap
