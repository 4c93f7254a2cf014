#include "tvc/trainer/tta.hpp"

#include <cmath>

#include "tvc/numcore/optimizer.hpp"
#include "tvc/trainer/rollout.hpp"
#include "tvc/trainer/trainer.hpp"

namespace tvc::trainer {

using agent::AgentParams;
using agent::ParamId;
using agent::Partition;
using num::Tape;
using num::Var;

namespace {

Var mean_of(const std::vector<Var>& terms) {
  Var acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = num::add(acc, terms[i]);
  return num::scale(acc, 1.0 / static_cast<double>(terms.size()));
}

void info_nce_terms(Tape& tape, AgentParams& params, const std::vector<Var>& queries,
                    const std::vector<std::vector<double>>& keys, const agent::KeyQueue& queue, ParamId bilinear,
                    std::vector<Var>& out) {
  Var w = tape.param(params[bilinear]);
  for (std::size_t t = 0; t < queries.size(); ++t) {
    Var pos = tape.constant(num::Shape{keys[t].size()}, keys[t]);
    out.push_back(objectives::info_nce(queries[t], pos, tape.constant(select_negatives(keys, t, queue)), w));
  }
}

}  // namespace

AdaptResult adapt_test_time(const AgentParams& trained, const world::EnvironmentGraph& graph,
                            const world::Episode& episode, const RunConfig& config, std::uint64_t seed,
                            AgentParams* adapted) {
  AgentParams params = trained;
  params.set_trainable(Partition::kMl, false);
  params.set_trainable(Partition::kCl, true);

  AdaptResult res;
  res.ml_hash_before = agent::partition_hash(params, Partition::kMl);
  const int iters = config.tta.iterations;
  if (iters == 0) {
    res.record = greedy_episode(params, graph, episode);
    res.ml_hash_after = agent::partition_hash(params, Partition::kMl);
    if (adapted) *adapted = std::move(params);
    return res;
  }

  Rng rng = Rng::derive(seed, Stream::kTta, hash_string(episode.episode_id));
  const std::vector<int> path = greedy_episode(params, graph, episode).actions;
  std::vector<augment::AugmentationSpec> views;
  for (int b = 0; b < config.tta.views; ++b) views.push_back(augment::sample_augmentation(config.pool, rng));

  const auto& sw = config.switches;
  const auto& lw = config.loss;
  const bool contrast = path.size() >= 2;
  auto cl = params.partition(Partition::kCl);
  num::OptimizerState opt = num::make_adam_state(cl, num::AdamConfig{config.tta.learning_rate});

  for (int it = 0; it <= iters; ++it) {
    const bool update = it < iters;
    Tape tape;
    const agent::InstructionEncoding instr = agent::encode_instruction(tape, params, episode.instruction);
    RolloutOptions base;
    base.mode = RolloutMode::kForced;
    base.forced = path;
    base.instruction = &instr;

    Rollout raw;
    std::vector<Var> q_il, q_rl;
    if (update && contrast && (sw.cl_il || sw.cl_rl)) {
      raw = rollout(tape, params, graph, episode, base);
      for (const auto& s : raw.steps) {
        if (sw.cl_il) q_il.push_back(agent::project_il(tape, params, agent::pool_sectors(tape, s.sectors, s.weights)));
        if (sw.cl_rl) {
          Var emb = agent::critic_embedding(tape, s.hidden, s.sectors);
          q_rl.push_back(agent::project_rl(tape, params, agent::critic_hidden(tape, params, emb, s.action)));
        }
      }
    }

    std::vector<Var> ent_terms, cl_il_terms, cl_rl_terms;
    for (const auto& spec : views) {
      RolloutOptions opts = base;
      opts.augmentation = &spec;
      Rollout view = rollout(tape, params, graph, episode, opts);
      for (const auto& s : view.steps) ent_terms.push_back(s.log_probs);
      if (raw.steps.empty()) continue;
      std::vector<std::vector<double>> k_il, k_rl;
      for (std::size_t t = 0; t < view.steps.size(); ++t) {
        const auto& rs = raw.steps[t];
        Var ek = agent::encode_observation(tape, params, view.steps[t].obs.features, true);
        if (sw.cl_il) {
          k_il.push_back(agent::project_il(tape, params, agent::pool_sectors(tape, ek, rs.weights), true).values());
        }
        if (sw.cl_rl) {
          Var emb_k = agent::critic_embedding(tape, rs.hidden, ek);
          k_rl.push_back(
              agent::project_rl(tape, params, agent::critic_hidden(tape, params, emb_k, rs.action, true), true)
                  .values());
        }
      }
      if (sw.cl_il) info_nce_terms(tape, params, q_il, k_il, params.queue_il, ParamId::kBilIl, cl_il_terms);
      if (sw.cl_rl) info_nce_terms(tape, params, q_rl, k_rl, params.queue_rl, ParamId::kBilRl, cl_rl_terms);
    }

    Var ent = objectives::tta_objective(ent_terms);
    res.entropy_curve.push_back(ent.item());
    if (!update) break;

    Var loss = ent;
    if (!cl_il_terms.empty()) loss = num::add(loss, num::scale(mean_of(cl_il_terms), lw.lambda_cl_il));
    if (!cl_rl_terms.empty()) loss = num::add(loss, num::scale(mean_of(cl_rl_terms), lw.lambda_cl_rl));
    if (!std::isfinite(loss.item())) throw DivergenceDetected(it + 1, "non-finite adaptation loss");
    num::zero_grad(cl);
    tape.backward(loss);
    for (auto* p : cl) {
      if (!p->has_grad()) p->zero_grad();
    }
    num::clip_grad_norm(cl, config.train.grad_clip);
    num::adam_step(cl, opt);
    if (config.tta.momentum_updates) {
      agent::momentum_update_encoder(params);
      agent::momentum_update_critic(params);
    }
  }

  res.record = greedy_episode(params, graph, episode);
  res.ml_hash_after = agent::partition_hash(params, Partition::kMl);
  if (adapted) *adapted = std::move(params);
  return res;
}

}  // namespace tvc::trainer
