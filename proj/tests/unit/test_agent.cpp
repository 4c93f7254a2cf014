#include <cmath>
#include <vector>

#include "doctest.h"
#include "support/gradcheck.hpp"
#include "tvc/agent/agent.hpp"
#include "tvc/util/rng.hpp"
#include "tvc/world/episodes.hpp"

using namespace tvc;
using namespace tvc::agent;
using num::Tape;
using num::Tensor;
using num::Var;

namespace {

AgentConfig test_config() {
  AgentConfig c;
  c.vocab_size = world::Vocabulary::instance().size();
  return c;
}

Tensor random_features(const AgentConfig& c, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t({static_cast<std::size_t>(c.views), static_cast<std::size_t>(c.feature_dim)});
  for (auto& v : t.data) v = rng.normal();
  return t;
}

std::vector<std::uint8_t> mask_every_third(int views) {
  std::vector<std::uint8_t> m(static_cast<std::size_t>(views), 0);
  for (int i = 0; i < views; i += 3) m[static_cast<std::size_t>(i)] = 1;
  return m;
}

double distance(const AgentParams& p, ParamId a, ParamId b) {
  double s = 0;
  for (std::size_t i = 0; i < p[a].value.size(); ++i) s += std::pow(p[a].value[i] - p[b].value[i], 2);
  return std::sqrt(s);
}

std::vector<double> run_steps(AgentParams& params, const std::vector<int>& tokens, const Tensor& feats,
                              const std::vector<std::uint8_t>& nav) {
  Tape tape;
  auto instr = encode_instruction(tape, params, tokens);
  auto state = initial_state(tape, params, instr);
  std::vector<double> out;
  for (int s = 0; s < 3; ++s) {
    Var e = encode_observation(tape, params, feats);
    auto step = decode_step(tape, params, state, attend_visual(tape, params, e, state.hidden), e, nav,
                            instr.features);
    out.insert(out.end(), step.logits.values().begin(), step.logits.values().end());
    state = step.state;
    state.prev_action = s;
  }
  return out;
}

}  // namespace

TEST_CASE("partitions cover every parameter exactly once") {
  AgentParams p(test_config(), 1);
  const auto ml = p.partition(Partition::kMl);
  const auto cl = p.partition(Partition::kCl);
  const auto mo = p.partition(Partition::kMomentum);
  CHECK(ml.size() + cl.size() + mo.size() == kParamCount);
  for (auto* q : mo) CHECK_FALSE(q->requires_grad);
  for (const auto& [k, q] : encoder_momentum_pairs()) CHECK(p[k].value == p[q].value);
  for (const auto& [k, q] : critic_momentum_pairs()) CHECK(p[k].value == p[q].value);
}

TEST_CASE("instruction encoder shapes, determinism and order sensitivity") {
  AgentParams p(test_config(), 2);
  const int H = p.config().hidden;
  {
    Tape t;
    auto enc = encode_instruction(t, p, std::vector<int>{4});
    CHECK(enc.features.shape() == num::Shape{1, static_cast<std::size_t>(H)});
    CHECK(enc.summary.shape() == num::Shape{static_cast<std::size_t>(H)});
  }
  const std::vector<int> a{1, 2, 20, 3, 30};
  const std::vector<int> b{30, 3, 20, 2, 1};
  Tape t1, t2, t3;
  auto e1 = encode_instruction(t1, p, a);
  auto e2 = encode_instruction(t2, p, a);
  auto e3 = encode_instruction(t3, p, b);
  CHECK(e1.summary.values() == e2.summary.values());
  double diff = 0;
  for (std::size_t i = 0; i < e1.summary.size(); ++i) diff += std::abs(e1.summary[i] - e3.summary[i]);
  CHECK(diff > 0.0);
  Tape t4;
  CHECK_THROWS_AS(encode_instruction(t4, p, std::vector<int>{}), EmptyInstruction);
  CHECK_THROWS_AS(encode_instruction(t4, p, std::vector<int>{p.config().vocab_size}), UnknownToken);
}

TEST_CASE("visual attention cases") {
  AgentParams p(test_config(), 3);
  const auto& cfg = p.config();
  const Tensor feats = random_features(cfg, 5);
  SUBCASE("equal scores give the row mean") {
    p[ParamId::kAttnF].value = Tensor(p[ParamId::kAttnF].value.shape, 0.0);
    Tape t;
    Var e = t.constant(feats);
    Var out = attend_visual(t, p, e, t.constant(Tensor({static_cast<std::size_t>(cfg.hidden)}, 1.0)));
    for (std::size_t j = 0; j < feats.cols(); ++j) {
      double m = 0;
      for (std::size_t r = 0; r < feats.rows(); ++r) m += feats.at(r, j) / feats.rows();
      CHECK(out[j] == doctest::Approx(m).epsilon(1e-12));
    }
  }
  SUBCASE("dominant score selects its row") {
    // W_F h = 50 * basis_0 and a feature matrix whose column 0 is one-hot on row 4.
    Tensor f = feats;
    for (std::size_t r = 0; r < f.rows(); ++r) f.at(r, 0) = r == 4 ? 1.0 : 0.0;
    auto& wf = p[ParamId::kAttnF].value;
    wf = Tensor(wf.shape, 0.0);
    wf.at(0, 0) = 50.0;
    Tensor h({static_cast<std::size_t>(cfg.hidden)}, 0.0);
    h[0] = 1.0;
    Tape t;
    Var out = attend_visual(t, p, t.constant(f), t.constant(h));
    for (std::size_t j = 0; j < f.cols(); ++j) CHECK(std::abs(out[j] - f.at(4, j)) < 1e-9);
  }
  SUBCASE("random case matches direct summation") {
    Rng rng(9);
    Tensor h({static_cast<std::size_t>(cfg.hidden)});
    for (auto& v : h.data) v = rng.normal();
    Tape t;
    Var out = attend_visual(t, p, t.constant(feats), t.constant(h));
    const auto& wf = p[ParamId::kAttnF].value;
    std::vector<double> wh(feats.cols(), 0.0);
    for (std::size_t i = 0; i < h.size(); ++i)
      for (std::size_t j = 0; j < feats.cols(); ++j) wh[j] += h[i] * wf.at(i, j);
    std::vector<double> score(feats.rows(), 0.0);
    for (std::size_t r = 0; r < feats.rows(); ++r)
      for (std::size_t j = 0; j < feats.cols(); ++j) score[r] += feats.at(r, j) * wh[j];
    double z = 0;
    for (double s : score) z += std::exp(s);
    for (std::size_t j = 0; j < feats.cols(); ++j) {
      double expect = 0;
      for (std::size_t r = 0; r < feats.rows(); ++r) expect += std::exp(score[r]) / z * feats.at(r, j);
      CHECK(std::abs(out[j] - expect) < 1e-12 * std::max(1.0, std::abs(expect)));
    }
  }
}

TEST_CASE("decode step masks, shapes and step bound") {
  AgentParams p(test_config(), 4);
  const auto& cfg = p.config();
  const Tensor feats = random_features(cfg, 6);
  const std::vector<int> tokens{1, 5, 9, 22};
  Tape t;
  auto instr = encode_instruction(t, p, tokens);
  auto state = initial_state(t, p, instr);
  Var e = encode_observation(t, p, feats);
  Var att = attend_visual(t, p, e, state.hidden);
  std::vector<std::uint8_t> none(static_cast<std::size_t>(cfg.views), 0);
  auto only_stop = decode_step(t, p, state, att, e, none, instr.features);
  CHECK(only_stop.logits.size() == static_cast<std::size_t>(cfg.views + 1));
  Var probs = num::softmax(only_stop.logits);
  CHECK(probs[static_cast<std::size_t>(cfg.stop_action())] > 1 - 1e-6);

  const auto nav = mask_every_third(cfg.views);
  auto out = decode_step(t, p, state, att, e, nav, instr.features);
  Var pr = num::softmax(out.logits);
  double total = 0, masked = 0;
  for (std::size_t k = 0; k < pr.size(); ++k) {
    total += pr[k];
    if (k < nav.size() && !nav[k]) masked += pr[k];
  }
  CHECK(std::abs(total - 1.0) < 1e-9);
  CHECK(masked < 1e-6);
  CHECK(out.state.hidden.size() == state.hidden.size());
  CHECK(out.state.step == 1);

  DecoderState late = state;
  late.step = cfg.max_steps;
  CHECK_THROWS_AS(decode_step(t, p, late, att, e, nav, instr.features), MaxStepsExceeded);
}

TEST_CASE("momentum update special cases") {
  AgentParams p(test_config(), 5);
  SUBCASE("m = 0 copies the query") {
    p[ParamId::kVisW].value.data[3] += 1.0;
    p[ParamId::kCriticWo].value.data[7] -= 2.0;
    p.set_momentum(0.0);
    momentum_update_encoder(p);
    momentum_update_critic(p);
    for (const auto& [k, q] : encoder_momentum_pairs()) CHECK(p[k].value == p[q].value);
    for (const auto& [k, q] : critic_momentum_pairs()) CHECK(p[k].value == p[q].value);
  }
  SUBCASE("scalar arithmetic") {
    p[ParamId::kKeyVisB].value = Tensor(p[ParamId::kKeyVisB].value.shape, 1.0);
    p[ParamId::kVisB].value = Tensor(p[ParamId::kVisB].value.shape, 0.0);
    p.set_momentum(0.999);
    momentum_update_encoder(p);
    CHECK(p[ParamId::kKeyVisB].value[0] == 0.999);
  }
  SUBCASE("critic update leaves the key encoder alone") {
    p[ParamId::kVisW].value.data[0] += 1.0;
    p[ParamId::kCriticW2].value.data[0] += 1.0;
    const Tensor before = p[ParamId::kKeyVisW].value;
    momentum_update_critic(p);
    CHECK(p[ParamId::kKeyVisW].value == before);
    CHECK(p[ParamId::kKeyCriticW2].value != p[ParamId::kCriticW2].value);
  }
  SUBCASE("betweenness") {
    Rng rng(3);
    for (auto& v : p[ParamId::kProjIl].value.data) v += rng.normal();
    const Tensor old = p[ParamId::kKeyProjIl].value;
    p.set_momentum(0.7);
    momentum_update_encoder(p);
    const auto& now = p[ParamId::kKeyProjIl].value;
    const auto& q = p[ParamId::kProjIl].value;
    for (std::size_t i = 0; i < now.size(); ++i) {
      CHECK(now[i] >= std::min(old[i], q[i]));
      CHECK(now[i] <= std::max(old[i], q[i]));
    }
  }
}

TEST_CASE("geometric decay of the momentum gap") {
  for (double m : {0.5, 0.9}) {
    AgentParams p(test_config(), 6);
    Rng rng(7);
    for (auto& v : p[ParamId::kVisW].value.data) v += rng.normal();
    for (auto& v : p[ParamId::kCriticWa].value.data) v += rng.normal();
    p.set_momentum(m);
    const double d0 = distance(p, ParamId::kKeyVisW, ParamId::kVisW);
    const double c0 = distance(p, ParamId::kKeyCriticWa, ParamId::kCriticWa);
    for (int n = 1; n <= 20; ++n) {
      momentum_update_encoder(p);
      momentum_update_critic(p);
      CHECK(std::abs(distance(p, ParamId::kKeyVisW, ParamId::kVisW) - std::pow(m, n) * d0) < 1e-10);
      CHECK(std::abs(distance(p, ParamId::kKeyCriticWa, ParamId::kCriticWa) - std::pow(m, n) * c0) < 1e-10);
    }
  }
}

TEST_CASE("critic is deterministic, finite and has correct embedding gradients") {
  AgentParams p(test_config(), 7);
  const auto& cfg = p.config();
  Rng rng(8);
  num::Parameter emb("emb", Tensor({static_cast<std::size_t>(cfg.critic_input())}));
  for (auto& v : emb.value.data) v = rng.uniform(-2, 2);
  for (int a = 0; a < cfg.num_actions(); ++a) {
    Tape t1, t2;
    const double q1 = critic_q(t1, p, t1.param(emb), a).item();
    const double q2 = critic_q(t2, p, t2.param(emb), a).item();
    CHECK(q1 == q2);
    CHECK(std::isfinite(q1));
    Tape t3;
    CHECK(critic_q_all(t3, p, t3.param(emb))[static_cast<std::size_t>(a)] == doctest::Approx(q1).epsilon(1e-14));
  }
  Tape t;
  CHECK_THROWS_AS(critic_q(t, p, t.param(emb), cfg.num_actions()), InvalidAction);
  CHECK_THROWS_AS(critic_q(t, p, t.param(emb), -1), InvalidAction);
  std::vector<num::Parameter*> ps{&emb};
  const auto r = testing::check_gradients(ps, [&](Tape& tp) { return critic_q(tp, p, tp.param(emb), 3); });
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("momentum copies never receive gradients") {
  AgentParams p(test_config(), 8);
  const Tensor feats = random_features(p.config(), 1);
  Tape t;
  Var e = encode_observation(t, p, feats, true);
  Var k = project_il(t, p, num::row(e, 0), true);
  Var q = project_il(t, p, num::row(encode_observation(t, p, feats), 0));
  t.backward(num::dot(q, k));
  for (auto* m : p.partition(Partition::kMomentum)) CHECK_FALSE(m->has_grad());
  CHECK(p[ParamId::kProjIl].has_grad());
}

TEST_CASE("key queue behaves as a bounded FIFO of unit keys") {
  KeyQueue q(2);
  q.push(std::vector<double>{3, 4});
  q.push(std::vector<double>{1, 0});
  q.push(std::vector<double>{0, 2});
  CHECK(q.size() == 2);
  CHECK(q.entries().front() == std::vector<double>{1, 0});
  CHECK(q.entries().back() == std::vector<double>{0, 1});
  for (const auto& e : q.entries()) CHECK(std::hypot(e[0], e[1]) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(q.push(std::vector<double>{NAN, 1}), num::NonFiniteValue);
  KeyQueue r(2);
  r.push(std::vector<double>{3, 4});
  r.push(std::vector<double>{1, 0});
  r.push(std::vector<double>{0, 2});
  CHECK(q == r);
}

TEST_CASE("checkpoint round trip reproduces decode outputs bitwise") {
  AgentParams p(test_config(), 9);
  Rng rng(4);
  for (auto* prm : p.all()) {
    for (auto& v : prm->value.data) v += 1e-3 * rng.normal();
  }
  p.queue_il.push(std::vector<double>(32, 0.3));
  const auto json = params_to_json(p);
  AgentParams back = params_from_json(nlohmann::json::parse(json.dump()));
  for (auto id = 0; id < static_cast<int>(kParamCount); ++id) {
    CHECK(back[static_cast<ParamId>(id)].value == p[static_cast<ParamId>(id)].value);
  }
  CHECK(back.queue_il == p.queue_il);
  CHECK(partition_hash(back, Partition::kMl) == partition_hash(p, Partition::kMl));
  const auto feats = random_features(p.config(), 2);
  const auto nav = mask_every_third(p.config().views);
  const std::vector<int> tokens{3, 4, 25, 6};
  CHECK(run_steps(p, tokens, feats, nav) == run_steps(back, tokens, feats, nav));
}
