#include "tvc/agent/agent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tvc/util/hash.hpp"
#include "tvc/util/rng.hpp"

namespace tvc::agent {

using num::Parameter;
using num::Shape;
using num::Tape;
using num::Tensor;
using num::Var;

namespace {

struct ParamInfo {
  ParamId id;
  const char* name;
  Partition part;
};

constexpr ParamInfo kInfo[] = {
    {ParamId::kWordEmb, "word_emb", Partition::kMl},
    {ParamId::kEncFwWx, "enc_fw_wx", Partition::kMl},
    {ParamId::kEncFwWh, "enc_fw_wh", Partition::kMl},
    {ParamId::kEncFwB, "enc_fw_b", Partition::kMl},
    {ParamId::kEncBwWx, "enc_bw_wx", Partition::kMl},
    {ParamId::kEncBwWh, "enc_bw_wh", Partition::kMl},
    {ParamId::kEncBwB, "enc_bw_b", Partition::kMl},
    {ParamId::kInitW, "init_w", Partition::kMl},
    {ParamId::kInitB, "init_b", Partition::kMl},
    {ParamId::kAttnF, "attn_f", Partition::kMl},
    {ParamId::kActEmb, "act_emb", Partition::kMl},
    {ParamId::kCellWx, "cell_wx", Partition::kMl},
    {ParamId::kCellWh, "cell_wh", Partition::kMl},
    {ParamId::kCellB, "cell_b", Partition::kMl},
    {ParamId::kAttnU, "attn_u", Partition::kMl},
    {ParamId::kOutW, "out_w", Partition::kMl},
    {ParamId::kOutB, "out_b", Partition::kMl},
    {ParamId::kActW, "act_w", Partition::kMl},
    {ParamId::kStopG, "stop_g", Partition::kMl},
    {ParamId::kCriticWo, "critic_wo", Partition::kMl},
    {ParamId::kCriticWa, "critic_wa", Partition::kMl},
    {ParamId::kCriticB1, "critic_b1", Partition::kMl},
    {ParamId::kCriticW2, "critic_w2", Partition::kMl},
    {ParamId::kCriticB2, "critic_b2", Partition::kMl},
    {ParamId::kVisW, "vis_w", Partition::kCl},
    {ParamId::kVisB, "vis_b", Partition::kCl},
    {ParamId::kProjIl, "proj_il", Partition::kCl},
    {ParamId::kProjRl, "proj_rl", Partition::kCl},
    {ParamId::kBilIl, "bil_il", Partition::kCl},
    {ParamId::kBilRl, "bil_rl", Partition::kCl},
    {ParamId::kKeyVisW, "key_vis_w", Partition::kMomentum},
    {ParamId::kKeyVisB, "key_vis_b", Partition::kMomentum},
    {ParamId::kKeyProjIl, "key_proj_il", Partition::kMomentum},
    {ParamId::kKeyCriticWo, "key_critic_wo", Partition::kMomentum},
    {ParamId::kKeyCriticWa, "key_critic_wa", Partition::kMomentum},
    {ParamId::kKeyCriticB1, "key_critic_b1", Partition::kMomentum},
    {ParamId::kKeyCriticW2, "key_critic_w2", Partition::kMomentum},
    {ParamId::kKeyCriticB2, "key_critic_b2", Partition::kMomentum},
    {ParamId::kKeyProjRl, "key_proj_rl", Partition::kMomentum},
};
static_assert(std::size(kInfo) == kParamCount);

constexpr std::pair<ParamId, ParamId> kEncoderPairs[] = {
    {ParamId::kKeyVisW, ParamId::kVisW},
    {ParamId::kKeyVisB, ParamId::kVisB},
    {ParamId::kKeyProjIl, ParamId::kProjIl},
};

constexpr std::pair<ParamId, ParamId> kCriticPairs[] = {
    {ParamId::kKeyCriticWo, ParamId::kCriticWo},
    {ParamId::kKeyCriticWa, ParamId::kCriticWa},
    {ParamId::kKeyCriticB1, ParamId::kCriticB1},
    {ParamId::kKeyCriticW2, ParamId::kCriticW2},
    {ParamId::kKeyCriticB2, ParamId::kCriticB2},
    {ParamId::kKeyProjRl, ParamId::kProjRl},
};

constexpr double kMasked = -1e9;

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = rng.uniform(-bound, bound);
  return t;
}

Tensor normal_tensor(Shape shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = rng.normal(0.0, stddev);
  return t;
}

Tensor scaled_identity(std::size_t n, double s) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = s;
  return t;
}

// Gated recurrent cell. `x_proj` is x W_x + b with gates ordered (z, r, n).
Var gru(Var x_proj, Var h, Var wh, std::size_t hs) {
  Var hp = num::matmul(h, wh);
  Var z = num::sigmoid(num::slice(x_proj, 0, hs) + num::slice(hp, 0, hs));
  Var r = num::sigmoid(num::slice(x_proj, hs, hs) + num::slice(hp, hs, hs));
  Var n = num::tanh(num::slice(x_proj, 2 * hs, hs) + r * num::slice(hp, 2 * hs, hs));
  return n + z * (h - n);
}

void blend(Parameter& target, const Parameter& source, double m) {
  if (target.value.shape != source.value.shape) {
    throw num::ShapeMismatch("momentum update: " + target.name + " " + num::shape_str(target.value.shape) +
                             " vs " + source.name + " " + num::shape_str(source.value.shape));
  }
  for (std::size_t i = 0; i < target.value.size(); ++i) {
    target.value.data[i] = m * target.value.data[i] + (1.0 - m) * source.value.data[i];
  }
}

}  // namespace

void AgentConfig::validate() const {
  auto positive = [](int v, const char* what) {
    if (v <= 0) throw AgentError(std::string("agent config: ") + what + " must be positive");
  };
  positive(views, "views");
  positive(feature_dim, "feature_dim");
  positive(vocab_size, "vocab_size");
  positive(word_dim, "word_dim");
  positive(action_dim, "action_dim");
  positive(proj_dim, "proj_dim");
  positive(critic_hidden, "critic_hidden");
  positive(max_steps, "max_steps");
  positive(queue_size, "queue_size");
  if (hidden <= 0 || hidden % 2 != 0) throw AgentError("agent config: hidden must be positive and even");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw AgentError("agent config: momentum must be in [0, 1)");
  if (!(bilinear_scale > 0.0)) throw AgentError("agent config: bilinear_scale must be positive");
}

nlohmann::json agent_config_to_json(const AgentConfig& c) {
  return {{"views", c.views},           {"feature_dim", c.feature_dim}, {"vocab_size", c.vocab_size},
          {"hidden", c.hidden},         {"word_dim", c.word_dim},       {"action_dim", c.action_dim},
          {"proj_dim", c.proj_dim},     {"critic_hidden", c.critic_hidden},
          {"max_steps", c.max_steps},   {"queue_size", c.queue_size},   {"momentum", c.momentum},
          {"bilinear_scale", c.bilinear_scale}};
}

AgentConfig agent_config_from_json(const nlohmann::json& j) {
  AgentConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "views") c.views = value.get<int>();
    else if (key == "feature_dim") c.feature_dim = value.get<int>();
    else if (key == "vocab_size") c.vocab_size = value.get<int>();
    else if (key == "hidden") c.hidden = value.get<int>();
    else if (key == "word_dim") c.word_dim = value.get<int>();
    else if (key == "action_dim") c.action_dim = value.get<int>();
    else if (key == "proj_dim") c.proj_dim = value.get<int>();
    else if (key == "critic_hidden") c.critic_hidden = value.get<int>();
    else if (key == "max_steps") c.max_steps = value.get<int>();
    else if (key == "queue_size") c.queue_size = value.get<int>();
    else if (key == "momentum") c.momentum = value.get<double>();
    else if (key == "bilinear_scale") c.bilinear_scale = value.get<double>();
    else throw AgentError("unknown agent config key '" + key + "'");
  }
  return c;
}

const char* param_name(ParamId id) { return kInfo[static_cast<std::size_t>(id)].name; }
Partition param_partition(ParamId id) { return kInfo[static_cast<std::size_t>(id)].part; }

std::span<const std::pair<ParamId, ParamId>> encoder_momentum_pairs() { return kEncoderPairs; }
std::span<const std::pair<ParamId, ParamId>> critic_momentum_pairs() { return kCriticPairs; }

// ---- KeyQueue -----------------------------------------------------------------

KeyQueue::KeyQueue(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw AgentError("key queue capacity must be positive");
}

void KeyQueue::push(std::span<const double> key) {
  if (!num::all_finite(key)) throw num::NonFiniteValue("key queue: non-finite key");
  double sq = 0.0;
  for (double v : key) sq += v * v;
  const double norm = std::sqrt(sq);
  if (!(norm > 0.0)) throw num::NonFiniteValue("key queue: zero key");
  std::vector<double> unit(key.begin(), key.end());
  for (auto& v : unit) v /= norm;
  entries_.push_back(std::move(unit));
  while (entries_.size() > capacity_) entries_.pop_front();
}

void KeyQueue::restore(std::deque<std::vector<double>> entries) {
  for (const auto& e : entries) {
    if (!num::all_finite(e)) throw num::NonFiniteValue("key queue: non-finite key");
  }
  entries_ = std::move(entries);
  while (entries_.size() > capacity_) entries_.pop_front();
}

// ---- AgentParams --------------------------------------------------------------

AgentParams::AgentParams(const AgentConfig& config, std::uint64_t seed)
    : queue_il(static_cast<std::size_t>(config.queue_size)),
      queue_rl(static_cast<std::size_t>(config.queue_size)),
      config_(config),
      momentum_(config.momentum) {
  config.validate();
  Rng rng = Rng::derive(seed, Stream::kInit);
  const auto V = static_cast<std::size_t>(config.views);
  const auto D = static_cast<std::size_t>(config.feature_dim);
  const auto E = static_cast<std::size_t>(config.embed_dim());
  const auto H = static_cast<std::size_t>(config.hidden);
  const auto H2 = H / 2;
  const auto W = static_cast<std::size_t>(config.word_dim);
  const auto A = static_cast<std::size_t>(config.action_dim);
  const auto P = static_cast<std::size_t>(config.proj_dim);
  const auto C = static_cast<std::size_t>(config.critic_hidden);
  const auto K = static_cast<std::size_t>(config.vocab_size);
  auto fan = [](std::size_t in) { return 1.0 / std::sqrt(static_cast<double>(in)); };
  auto set = [&](ParamId id, Tensor t) {
    auto& p = params_[static_cast<std::size_t>(id)];
    p = Parameter(param_name(id), std::move(t), param_partition(id) != Partition::kMomentum);
  };

  set(ParamId::kWordEmb, normal_tensor({K, W}, 1.0, rng));
  set(ParamId::kEncFwWx, uniform_tensor({W, 3 * H2}, fan(W), rng));
  set(ParamId::kEncFwWh, uniform_tensor({H2, 3 * H2}, fan(H2), rng));
  set(ParamId::kEncFwB, uniform_tensor({3 * H2}, fan(H2), rng));
  set(ParamId::kEncBwWx, uniform_tensor({W, 3 * H2}, fan(W), rng));
  set(ParamId::kEncBwWh, uniform_tensor({H2, 3 * H2}, fan(H2), rng));
  set(ParamId::kEncBwB, uniform_tensor({3 * H2}, fan(H2), rng));
  set(ParamId::kInitW, uniform_tensor({H, H}, fan(H), rng));
  set(ParamId::kInitB, uniform_tensor({H}, fan(H), rng));
  set(ParamId::kAttnF, uniform_tensor({H, E}, fan(H), rng));
  set(ParamId::kActEmb, normal_tensor({V + 2, A}, 1.0, rng));
  set(ParamId::kCellWx, uniform_tensor({E + A, 3 * H}, fan(E + A), rng));
  set(ParamId::kCellWh, uniform_tensor({H, 3 * H}, fan(H), rng));
  set(ParamId::kCellB, uniform_tensor({3 * H}, fan(H), rng));
  set(ParamId::kAttnU, uniform_tensor({H, H}, fan(H), rng));
  set(ParamId::kOutW, uniform_tensor({2 * H, H}, fan(2 * H), rng));
  set(ParamId::kOutB, uniform_tensor({H}, fan(2 * H), rng));
  set(ParamId::kActW, uniform_tensor({H, E}, fan(H), rng));
  set(ParamId::kStopG, normal_tensor({E}, 1.0, rng));
  const std::size_t CI = H + E;
  set(ParamId::kCriticWo, uniform_tensor({CI, C}, fan(CI), rng));
  set(ParamId::kCriticWa, uniform_tensor({V + 1, C}, fan(CI), rng));
  set(ParamId::kCriticB1, uniform_tensor({C}, fan(CI), rng));
  set(ParamId::kCriticW2, uniform_tensor({C}, fan(C), rng));
  set(ParamId::kCriticB2, Tensor::scalar(0.0));
  if (D != E) throw AgentError("agent config: embedding width must equal feature_dim");
  set(ParamId::kVisW, scaled_identity(D, 1.0));
  set(ParamId::kVisB, Tensor({E}, 0.0));
  set(ParamId::kProjIl, uniform_tensor({E, P}, fan(E), rng));
  set(ParamId::kProjRl, uniform_tensor({C, P}, fan(C), rng));
  set(ParamId::kBilIl, scaled_identity(P, config.bilinear_scale));
  set(ParamId::kBilRl, scaled_identity(P, config.bilinear_scale));
  for (const auto& [key, query] : kEncoderPairs) set(key, (*this)[query].value);
  for (const auto& [key, query] : kCriticPairs) set(key, (*this)[query].value);
}

void AgentParams::set_momentum(double m) {
  if (!(m >= 0.0 && m < 1.0)) throw AgentError("momentum must be in [0, 1)");
  momentum_ = m;
}

std::vector<Parameter*> AgentParams::partition(Partition part) {
  std::vector<Parameter*> out;
  for (const auto& info : kInfo) {
    if (info.part == part) out.push_back(&(*this)[info.id]);
  }
  return out;
}

std::vector<const Parameter*> AgentParams::partition(Partition part) const {
  std::vector<const Parameter*> out;
  for (const auto& info : kInfo) {
    if (info.part == part) out.push_back(&(*this)[info.id]);
  }
  return out;
}

std::vector<Parameter*> AgentParams::all() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

void AgentParams::set_trainable(Partition part, bool trainable) {
  if (part == Partition::kMomentum) return;
  for (Parameter* p : partition(part)) p->requires_grad = trainable;
}

void momentum_update_encoder(AgentParams& params) {
  for (const auto& [key, query] : kEncoderPairs) blend(params[key], params[query], params.momentum());
}

void momentum_update_critic(AgentParams& params) {
  for (const auto& [key, query] : kCriticPairs) blend(params[key], params[query], params.momentum());
}

std::string partition_hash(const AgentParams& params, Partition part) {
  std::string bytes;
  for (const Parameter* p : params.partition(part)) {
    bytes += p->name;
    const auto* raw = reinterpret_cast<const char*>(p->value.data.data());
    bytes.append(raw, p->value.data.size() * sizeof(double));
  }
  return sha256_hex(bytes);
}

nlohmann::json params_to_json(const AgentParams& params) {
  nlohmann::json tensors = nlohmann::json::object();
  for (const auto& info : kInfo) {
    const auto& t = params[info.id].value;
    tensors[info.name] = {{"shape", t.shape}, {"data", t.data}};
  }
  auto queue_json = [](const KeyQueue& q) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : q.entries()) entries.push_back(e);
    return entries;
  };
  return {{"config", agent_config_to_json(params.config())},
          {"momentum", params.momentum()},
          {"tensors", tensors},
          {"queue_il", queue_json(params.queue_il)},
          {"queue_rl", queue_json(params.queue_rl)}};
}

AgentParams params_from_json(const nlohmann::json& j) {
  AgentParams params(agent_config_from_json(j.at("config")), 0);
  params.set_momentum(j.at("momentum").get<double>());
  const auto& tensors = j.at("tensors");
  for (const auto& info : kInfo) {
    const auto& entry = tensors.at(info.name);
    Tensor t(entry.at("shape").get<Shape>(), entry.at("data").get<std::vector<double>>());
    auto& p = params[info.id];
    if (t.shape != p.value.shape) {
      throw num::ShapeMismatch(std::string("checkpoint tensor ") + info.name + " has shape " +
                               num::shape_str(t.shape) + ", expected " + num::shape_str(p.value.shape));
    }
    p.value = std::move(t);
  }
  auto load_queue = [](KeyQueue& q, const nlohmann::json& arr) {
    std::deque<std::vector<double>> entries;
    for (const auto& e : arr) entries.push_back(e.get<std::vector<double>>());
    q.restore(std::move(entries));
  };
  load_queue(params.queue_il, j.at("queue_il"));
  load_queue(params.queue_rl, j.at("queue_rl"));
  return params;
}

// ---- forward pass ---------------------------------------------------------------

InstructionEncoding encode_instruction(Tape& tape, AgentParams& params, std::span<const int> tokens) {
  const auto& cfg = params.config();
  if (tokens.empty()) throw EmptyInstruction("instruction has no tokens");
  for (int t : tokens) {
    if (t < 0 || t >= cfg.vocab_size) throw UnknownToken("token id " + std::to_string(t) + " outside vocabulary");
  }
  const auto hs = static_cast<std::size_t>(cfg.hidden / 2);
  const std::size_t L = tokens.size();
  Var emb_table = tape.param(params[ParamId::kWordEmb]);
  std::vector<Var> words;
  words.reserve(L);
  for (int t : tokens) words.push_back(num::row(emb_table, static_cast<std::size_t>(t)));
  Var x = num::stack_rows(words);

  auto run = [&](ParamId wx, ParamId wh, ParamId b, bool reverse) {
    Var xp = num::add(num::matmul(x, tape.param(params[wx])), tape.param(params[b]));
    Var whv = tape.param(params[wh]);
    Var h = tape.constant(Tensor({hs}, 0.0));
    std::vector<Var> out(L);
    for (std::size_t k = 0; k < L; ++k) {
      const std::size_t i = reverse ? L - 1 - k : k;
      h = gru(num::row(xp, i), h, whv, hs);
      out[i] = h;
    }
    return out;
  };
  const auto fw = run(ParamId::kEncFwWx, ParamId::kEncFwWh, ParamId::kEncFwB, false);
  const auto bw = run(ParamId::kEncBwWx, ParamId::kEncBwWh, ParamId::kEncBwB, true);
  std::vector<Var> rows;
  rows.reserve(L);
  for (std::size_t i = 0; i < L; ++i) {
    std::vector<Var> pair{fw[i], bw[i]};
    rows.push_back(num::concat(pair));
  }
  std::vector<Var> ends{fw[L - 1], bw[0]};
  return {num::stack_rows(rows), num::concat(ends)};
}

Var encode_observation(Tape& tape, AgentParams& params, const Tensor& features, bool key_encoder) {
  const auto& cfg = params.config();
  if (features.rank() != 2 || features.rows() != static_cast<std::size_t>(cfg.views) ||
      features.cols() != static_cast<std::size_t>(cfg.feature_dim)) {
    throw num::ShapeMismatch("observation shape " + num::shape_str(features.shape) + " does not match agent");
  }
  Var w = tape.param(params[key_encoder ? ParamId::kKeyVisW : ParamId::kVisW]);
  Var b = tape.param(params[key_encoder ? ParamId::kKeyVisB : ParamId::kVisB]);
  return num::add(num::matmul(tape.constant(features), w), b);
}

Var attend_visual(Tape& tape, AgentParams& params, Var sector_embeddings, Var hidden) {
  Var query = num::matmul(hidden, tape.param(params[ParamId::kAttnF]));
  Var alpha = num::softmax(num::matmul(sector_embeddings, query));
  return num::matmul(alpha, sector_embeddings);
}

DecoderState initial_state(Tape& tape, AgentParams& params, const InstructionEncoding& instr) {
  Var h = num::tanh(num::add(num::matmul(instr.summary, tape.param(params[ParamId::kInitW])),
                             tape.param(params[ParamId::kInitB])));
  return {h, params.config().begin_token(), 0};
}

StepOutput decode_step(Tape& tape, AgentParams& params, const DecoderState& state, Var attended,
                       Var sector_embeddings, std::span<const std::uint8_t> navigable, Var instruction_features) {
  const auto& cfg = params.config();
  if (state.step >= cfg.max_steps) {
    throw MaxStepsExceeded("decode step " + std::to_string(state.step) + " reaches max_steps " +
                           std::to_string(cfg.max_steps));
  }
  if (navigable.size() != static_cast<std::size_t>(cfg.views)) {
    throw num::ShapeMismatch("navigability mask has " + std::to_string(navigable.size()) + " sectors");
  }
  if (state.prev_action < 0 || state.prev_action > cfg.begin_token()) {
    throw InvalidAction("previous action " + std::to_string(state.prev_action) + " out of range");
  }
  const auto H = static_cast<std::size_t>(cfg.hidden);
  Var act = num::row(tape.param(params[ParamId::kActEmb]), static_cast<std::size_t>(state.prev_action));
  std::vector<Var> in_parts{attended, act};
  Var x = num::concat(in_parts);
  Var xp = num::add(num::matmul(x, tape.param(params[ParamId::kCellWx])), tape.param(params[ParamId::kCellB]));
  Var cell = gru(xp, state.hidden, tape.param(params[ParamId::kCellWh]), H);

  Var uq = num::matmul(cell, tape.param(params[ParamId::kAttnU]));
  Var beta = num::softmax(num::matmul(instruction_features, uq));
  Var u_hat = num::matmul(beta, instruction_features);
  std::vector<Var> out_parts{u_hat, cell};
  Var h = num::tanh(num::add(num::matmul(num::concat(out_parts), tape.param(params[ParamId::kOutW])),
                             tape.param(params[ParamId::kOutB])));

  Var g = num::matmul(h, tape.param(params[ParamId::kActW]));
  Var sector_logits = num::matmul(sector_embeddings, g);
  Var stop_logit = num::dot(tape.param(params[ParamId::kStopG]), g);
  std::vector<Var> logit_parts{sector_logits, stop_logit};
  std::vector<double> mask(static_cast<std::size_t>(cfg.num_actions()), 0.0);
  for (std::size_t k = 0; k < navigable.size(); ++k) {
    if (!navigable[k]) mask[k] = kMasked;
  }
  Var logits = num::add(num::concat(logit_parts), tape.constant(Shape{mask.size()}, mask));

  StepOutput out;
  out.state = {h, -1, state.step + 1};
  out.logits = logits;
  return out;
}

Var critic_embedding(Tape& tape, Var hidden, Var sector_embeddings) {
  const std::size_t v = sector_embeddings.shape()[0];
  Var avg = num::matmul(tape.constant(Tensor({v}, 1.0 / static_cast<double>(v))), sector_embeddings);
  std::vector<Var> parts{num::detach(hidden), avg};
  return num::concat(parts);
}

namespace {

struct CriticIds {
  ParamId wo, wa, b1, w2, b2;
};

CriticIds critic_ids(bool key) {
  if (key) {
    return {ParamId::kKeyCriticWo, ParamId::kKeyCriticWa, ParamId::kKeyCriticB1, ParamId::kKeyCriticW2,
            ParamId::kKeyCriticB2};
  }
  return {ParamId::kCriticWo, ParamId::kCriticWa, ParamId::kCriticB1, ParamId::kCriticW2, ParamId::kCriticB2};
}

}  // namespace

Var critic_hidden(Tape& tape, AgentParams& params, Var embedding, int action, bool key_critic) {
  if (action < 0 || action >= params.config().num_actions()) {
    throw InvalidAction("critic action " + std::to_string(action) + " out of range");
  }
  const auto ids = critic_ids(key_critic);
  Var pre = num::add(num::matmul(embedding, tape.param(params[ids.wo])), tape.param(params[ids.b1]));
  return num::relu(pre + num::row(tape.param(params[ids.wa]), static_cast<std::size_t>(action)));
}

Var critic_q(Tape& tape, AgentParams& params, Var embedding, int action, bool key_critic) {
  const auto ids = critic_ids(key_critic);
  Var h = critic_hidden(tape, params, embedding, action, key_critic);
  return num::add(num::dot(h, tape.param(params[ids.w2])), tape.param(params[ids.b2]));
}

Var critic_q_all(Tape& tape, AgentParams& params, Var embedding, bool key_critic) {
  const auto ids = critic_ids(key_critic);
  Var pre = num::add(num::matmul(embedding, tape.param(params[ids.wo])), tape.param(params[ids.b1]));
  Var hidden = num::relu(num::add(tape.param(params[ids.wa]), pre));
  return num::add(num::matmul(hidden, tape.param(params[ids.w2])), tape.param(params[ids.b2]));
}

Var project_il(Tape& tape, AgentParams& params, Var pooled, bool key) {
  return num::l2_normalize(num::matmul(pooled, tape.param(params[key ? ParamId::kKeyProjIl : ParamId::kProjIl])));
}

Var project_rl(Tape& tape, AgentParams& params, Var hidden, bool key) {
  return num::l2_normalize(num::matmul(hidden, tape.param(params[key ? ParamId::kKeyProjRl : ParamId::kProjRl])));
}

std::vector<double> navigable_weights(Var logits, std::span<const std::uint8_t> navigable) {
  const auto& v = logits.values();
  std::vector<double> w(navigable.size(), 0.0);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < navigable.size(); ++k) {
    if (navigable[k]) mx = std::max(mx, v[k]);
  }
  if (!std::isfinite(mx)) return w;
  double z = 0.0;
  for (std::size_t k = 0; k < navigable.size(); ++k) {
    if (navigable[k]) z += (w[k] = std::exp(v[k] - mx));
  }
  for (auto& x : w) x /= z;
  return w;
}

Var pool_sectors(Tape& tape, Var sector_embeddings, std::span<const double> weights) {
  return num::matmul(tape.constant(Shape{weights.size()}, std::vector<double>(weights.begin(), weights.end())),
                     sector_embeddings);
}

}  // namespace tvc::agent
