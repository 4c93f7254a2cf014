#include "tvc/trainer/trainer.hpp"

#include <cmath>

#include "tvc/util/hash.hpp"
#include "tvc/world/serialize.hpp"

namespace tvc::trainer {

using agent::AgentParams;
using agent::ParamId;
using agent::Partition;
using nlohmann::json;
using num::Tape;
using num::Var;

namespace {

Var mean_of(const std::vector<Var>& terms) {
  Var acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = num::add(acc, terms[i]);
  return num::scale(acc, 1.0 / static_cast<double>(terms.size()));
}

// InfoNCE over one trajectory given per-step queries and key vectors.
void contrastive_terms(Tape& tape, AgentParams& params, const std::vector<Var>& queries,
                       const std::vector<std::vector<double>>& keys, const agent::KeyQueue& queue,
                       ParamId bilinear, std::vector<Var>& out) {
  Var w = tape.param(params[bilinear]);
  for (std::size_t t = 0; t < queries.size(); ++t) {
    Var pos = tape.constant(num::Shape{keys[t].size()}, keys[t]);
    Var neg = tape.constant(select_negatives(keys, t, queue));
    out.push_back(objectives::info_nce(queries[t], pos, neg, w));
  }
}

json optimizer_to_json(const num::OptimizerState& s) {
  return {{"step_count", s.step_count},
          {"learning_rate", s.config.learning_rate},
          {"beta1", s.config.beta1},
          {"beta2", s.config.beta2},
          {"epsilon", s.config.epsilon},
          {"first_moment", s.first_moment},
          {"second_moment", s.second_moment}};
}

num::OptimizerState optimizer_from_json(const json& j) {
  num::OptimizerState s;
  s.step_count = j.at("step_count").get<std::uint64_t>();
  s.config.learning_rate = j.at("learning_rate").get<double>();
  s.config.beta1 = j.at("beta1").get<double>();
  s.config.beta2 = j.at("beta2").get<double>();
  s.config.epsilon = j.at("epsilon").get<double>();
  s.first_moment = j.at("first_moment").get<std::vector<std::vector<double>>>();
  s.second_moment = j.at("second_moment").get<std::vector<std::vector<double>>>();
  return s;
}

}  // namespace

json stats_to_json(const IterationStats& s) {
  return {{"iteration", s.iteration}, {"loss", s.loss},     {"il", s.il},
          {"actor", s.actor},         {"critic", s.critic}, {"cl_il", s.cl_il},
          {"cl_rl", s.cl_rl},         {"grad_norm", s.grad_norm},
          {"sample_steps", s.sample_steps}, {"replay_size", s.replay_size}};
}

std::vector<num::Parameter*> optimizer_params(AgentParams& params) {
  auto out = params.partition(Partition::kMl);
  auto cl = params.partition(Partition::kCl);
  out.insert(out.end(), cl.begin(), cl.end());
  return out;
}

TrainState init_train_state(const RunConfig& config) {
  config.validate();
  TrainState s;
  s.params = AgentParams(config.resolved_agent(), config.seed);
  auto ps = optimizer_params(s.params);
  s.optimizer = num::make_adam_state(ps, num::AdamConfig{config.train.learning_rate});
  s.replay = ReplayBuffer(static_cast<std::size_t>(config.train.replay_capacity));
  return s;
}

IterationStats train_iteration(TrainState& state, const RunConfig& config, const world::World& world,
                               const std::vector<world::Episode>& train) {
  if (train.empty()) throw objectives::EmptyBatch("no training episodes");
  const int it = state.iteration + 1;
  AgentParams& P = state.params;
  const auto& lw = config.loss;
  const auto& sw = config.switches;
  auto ps = optimizer_params(P);
  num::zero_grad(ps);

  Rng batch_rng = Rng::derive(config.seed, Stream::kRollout, static_cast<std::uint64_t>(it));
  Rng aug_rng = Rng::derive(config.seed, Stream::kAugmentation, static_cast<std::uint64_t>(it));

  IterationStats stats;
  stats.iteration = it;
  std::vector<Var> il_terms, actor_terms, cl_il_terms, cl_rl_terms;
  std::vector<std::vector<double>> il_keys_all, rl_keys_all;
  std::vector<objectives::ReplayTuple> tuples;
  std::size_t sampled_steps = 0;
  std::size_t sampled_episodes = 0;

  try {
    Tape tape;
    for (int b = 0; b < config.train.batch_size; ++b) {
      const world::Episode& ep = train[batch_rng.below(train.size())];
      const auto& graph = world.scene(ep.scene_id);
      const augment::AugmentationSpec spec = augment::sample_augmentation(config.pool, aug_rng);
      const agent::InstructionEncoding instr = agent::encode_instruction(tape, P, ep.instruction);

      // Teacher-forced pass: imitation and the teacher-forcing contrastive head.
      if (sw.ml || sw.cl_il) {
        RolloutOptions opts;
        opts.mode = RolloutMode::kTeacherForcing;
        opts.instruction = &instr;
        Rollout tf = rollout(tape, P, graph, ep, opts);
        if (sw.ml) {
          std::vector<int> teacher;
          std::vector<Var> lps;
          for (const auto& s : tf.steps) {
            teacher.push_back(s.teacher);
            lps.push_back(s.log_probs);
          }
          il_terms.push_back(objectives::il_loss(teacher, lps));
        }
        if (sw.cl_il && tf.steps.size() >= 2) {
          std::vector<Var> queries;
          std::vector<std::vector<double>> keys;
          for (const auto& s : tf.steps) {
            queries.push_back(agent::project_il(tape, P, agent::pool_sectors(tape, s.sectors, s.weights)));
            const world::Observation aug = augment::apply(spec, s.obs);
            Var ek = agent::encode_observation(tape, P, aug.features, true);
            keys.push_back(agent::project_il(tape, P, agent::pool_sectors(tape, ek, s.weights), true).values());
          }
          contrastive_terms(tape, P, queries, keys, P.queue_il, ParamId::kBilIl, cl_il_terms);
          il_keys_all.insert(il_keys_all.end(), keys.begin(), keys.end());
        }
      }

      // Sampled pass: actor, replay transitions and the actor-critic contrastive head.
      if (sw.ml || sw.cl_rl) {
        RolloutOptions opts;
        opts.mode = RolloutMode::kSample;
        opts.rng = &batch_rng;
        opts.instruction = &instr;
        Rollout sr = rollout(tape, P, graph, ep, opts);
        const std::size_t T = sr.steps.size();
        sampled_steps += T;
        ++sampled_episodes;
        std::vector<Var> emb(T);
        for (std::size_t t = 0; t < T; ++t) emb[t] = agent::critic_embedding(tape, sr.steps[t].hidden, sr.steps[t].sectors);

        if (sw.ml) {
          for (std::size_t t = 0; t < T; ++t) {
            Var q_all = agent::critic_q_all(tape, P, num::detach(emb[t]));
            actor_terms.push_back(objectives::actor_loss(sr.steps[t].log_probs, q_all.values(), lw.alpha));
          }
          const bool stopped = sr.record.stop_reason == evalkit::StopReason::kStopped;
          for (std::size_t t = 0; t < T; ++t) {
            objectives::ReplayTuple tup;
            tup.o = emb[t].values();
            tup.a = sr.steps[t].action;
            const bool last = t + 1 == T;
            const bool is_stop = last && stopped;
            const int before = sr.record.nodes[t];
            const int after = is_stop ? before : sr.record.nodes[t + 1];
            tup.r = objectives::step_reward(graph, before, after, is_stop, ep.target);
            tup.d = last;
            if (last) {
              tup.o_next = tup.o;
            } else {
              tup.o_next = emb[t + 1].values();
              tup.next_action = sr.steps[t + 1].action;
              tup.next_logprob = sr.steps[t + 1].log_probs[static_cast<std::size_t>(tup.next_action)];
            }
            tuples.push_back(std::move(tup));
          }
        }
        if (sw.cl_rl && T >= 2) {
          std::vector<Var> queries;
          std::vector<std::vector<double>> keys;
          for (std::size_t t = 0; t < T; ++t) {
            const auto& s = sr.steps[t];
            queries.push_back(agent::project_rl(tape, P, agent::critic_hidden(tape, P, emb[t], s.action)));
            const world::Observation aug = augment::apply(spec, s.obs);
            Var ek = agent::encode_observation(tape, P, aug.features, true);
            Var emb_k = agent::critic_embedding(tape, s.hidden, ek);
            keys.push_back(
                agent::project_rl(tape, P, agent::critic_hidden(tape, P, emb_k, s.action, true), true).values());
          }
          contrastive_terms(tape, P, queries, keys, P.queue_rl, ParamId::kBilRl, cl_rl_terms);
          rl_keys_all.insert(rl_keys_all.end(), keys.begin(), keys.end());
        }
      }
    }

    Var l_ml, l_cl_il, l_cl_rl;
    if (sw.ml) {
      Var l_il = mean_of(il_terms);
      Var l_actor = mean_of(actor_terms);
      Var l_rl = num::scale(l_actor, lw.lambda_rl);
      const auto need = static_cast<std::size_t>(config.train.replay_batch);
      if (state.replay.size() >= need) {
        auto batch = state.replay.sample(need, batch_rng);
        std::vector<Var> qs;
        std::vector<double> targets;
        for (const auto* tup : batch) {
          qs.push_back(agent::critic_q(tape, P, tape.constant(num::Shape{tup->o.size()}, tup->o), tup->a));
          double q_next = 0.0;
          if (!tup->d) {
            Var on = tape.constant(num::Shape{tup->o_next.size()}, tup->o_next);
            q_next = agent::critic_q(tape, P, on, tup->next_action, true).item();
          }
          targets.push_back(objectives::sac_target(*tup, tup->next_logprob, q_next, lw));
        }
        Var l_critic = objectives::critic_loss(qs, targets);
        stats.critic = l_critic.item();
        l_rl = num::add(l_critic, l_rl);
      }
      stats.il = l_il.item();
      stats.actor = l_actor.item();
      l_ml = objectives::ml_aggregate(l_rl, l_il, lw);
    }
    if (sw.cl_il) {
      l_cl_il = cl_il_terms.empty() ? tape.scalar(0.0) : mean_of(cl_il_terms);
      stats.cl_il = l_cl_il.item();
    }
    if (sw.cl_rl) {
      l_cl_rl = cl_rl_terms.empty() ? tape.scalar(0.0) : mean_of(cl_rl_terms);
      stats.cl_rl = l_cl_rl.item();
    }
    Var total = objectives::train_objective(l_ml, l_cl_il, l_cl_rl, lw, sw);
    stats.loss = total.item();
    if (!std::isfinite(stats.loss)) throw DivergenceDetected(it, "non-finite loss");
    tape.backward(total);
  } catch (const num::NonFiniteValue& e) {
    throw DivergenceDetected(it, e.what());
  }

  for (auto* p : ps) {
    if (!p->has_grad()) p->zero_grad();
    if (!num::all_finite(p->grad)) throw DivergenceDetected(it, "non-finite gradient in " + p->name);
  }
  stats.grad_norm = num::clip_grad_norm(ps, config.train.grad_clip);
  num::adam_step(ps, state.optimizer);
  for (auto* p : ps) {
    if (!num::all_finite(p->value.data)) throw DivergenceDetected(it, "non-finite parameter " + p->name);
  }
  agent::momentum_update_encoder(P);
  agent::momentum_update_critic(P);
  for (const auto& k : il_keys_all) P.queue_il.push(k);
  for (const auto& k : rl_keys_all) P.queue_rl.push(k);
  for (auto& tup : tuples) state.replay.push(std::move(tup));

  state.iteration = it;
  stats.sample_steps = sampled_episodes ? static_cast<double>(sampled_steps) / static_cast<double>(sampled_episodes) : 0.0;
  stats.replay_size = state.replay.size();
  return stats;
}

std::vector<world::Episode> eval_subset(const std::vector<world::Episode>& episodes, int n) {
  if (n <= 0 || static_cast<std::size_t>(n) >= episodes.size()) return episodes;
  std::vector<world::Episode> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(episodes[static_cast<std::size_t>(i) * episodes.size() / static_cast<std::size_t>(n)]);
  return out;
}

json quick_eval(AgentParams& params, const world::World& world, const std::vector<world::Episode>& episodes) {
  std::vector<evalkit::MetricRow> rows;
  for (const auto& ep : episodes) {
    const auto& graph = world.scene(ep.scene_id);
    rows.push_back(evalkit::compute_metrics(greedy_episode(params, graph, ep), ep, graph, graph.success_radius()));
  }
  const auto agg = evalkit::aggregate(rows);
  return {{"episodes", agg.episodes}, {"sr", agg.sr}, {"spl", agg.spl}};
}

void train_joint(TrainState& state, const RunConfig& config, const world::World& world,
                 const world::EpisodeSets& episodes, const TrainHooks& hooks) {
  const auto seen = eval_subset(episodes.val_seen, config.train.eval_episodes);
  const auto unseen = eval_subset(episodes.val_unseen, config.train.eval_episodes);
  while (state.iteration < config.train.iterations) {
    const IterationStats stats = train_iteration(state, config, world, episodes.train);
    json line = stats_to_json(stats);
    if (config.train.eval_every > 0 && stats.iteration % config.train.eval_every == 0) {
      line["val_seen"] = quick_eval(state.params, world, seen);
      line["val_unseen"] = quick_eval(state.params, world, unseen);
    }
    if (hooks.on_log) hooks.on_log(line);
    if (hooks.on_checkpoint && config.train.checkpoint_every > 0 &&
        stats.iteration % config.train.checkpoint_every == 0) {
      hooks.on_checkpoint(state);
    }
  }
}

std::string world_hash(const world::World& world) { return sha256_hex(world::world_to_json(world).dump()); }

json checkpoint_to_json(const TrainState& state, const RunConfig& config, const std::string& whash) {
  return {{"format", "tvc-checkpoint"},
          {"version", 1},
          {"config", config_to_json(config)},
          {"config_hash", config_hash(config)},
          {"model_hash", model_hash(config)},
          {"world_hash", whash},
          {"iteration", state.iteration},
          {"params", agent::params_to_json(state.params)},
          {"optimizer", optimizer_to_json(state.optimizer)}};
}

LoadedCheckpoint checkpoint_from_json(const json& j) {
  if (!j.is_object() || j.value("format", "") != "tvc-checkpoint") {
    throw CheckpointMismatch("not a checkpoint document");
  }
  if (j.value("version", 0) != 1) throw CheckpointMismatch("unsupported checkpoint version");
  LoadedCheckpoint out;
  out.config = config_from_json(j.at("config"));
  if (config_hash(out.config) != j.at("config_hash").get<std::string>()) {
    throw CheckpointMismatch("checkpoint config hash does not match its config");
  }
  out.world_hash = j.at("world_hash").get<std::string>();
  out.state.params = agent::params_from_json(j.at("params"));
  if (!(out.state.params.config() == out.config.resolved_agent())) {
    throw CheckpointMismatch("checkpoint parameters do not match its agent config");
  }
  out.state.optimizer = optimizer_from_json(j.at("optimizer"));
  auto ps = optimizer_params(out.state.params);
  if (out.state.optimizer.first_moment.size() != ps.size()) {
    throw CheckpointMismatch("optimizer state does not match the parameters");
  }
  out.state.iteration = j.at("iteration").get<int>();
  out.state.replay = ReplayBuffer(static_cast<std::size_t>(out.config.train.replay_capacity));
  return out;
}

}  // namespace tvc::trainer
