#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tvc/numcore/tape.hpp"
#include "tvc/world/world.hpp"

namespace tvc::agent {

class AgentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownToken : public AgentError {
 public:
  using AgentError::AgentError;
};

class EmptyInstruction : public AgentError {
 public:
  using AgentError::AgentError;
};

class MaxStepsExceeded : public AgentError {
 public:
  using AgentError::AgentError;
};

class InvalidAction : public AgentError {
 public:
  using AgentError::AgentError;
};

struct AgentConfig {
  int views = 12;
  int feature_dim = 32;
  int vocab_size = 0;
  int hidden = 64;
  int word_dim = 32;
  int action_dim = 16;
  int proj_dim = 32;
  int critic_hidden = 64;
  int max_steps = 15;
  int queue_size = 256;
  double momentum = 0.99;
  double bilinear_scale = 10.0;  // initial bilinear W = scale * I

  int embed_dim() const { return feature_dim; }
  int critic_input() const { return hidden + embed_dim(); }
  int num_actions() const { return views + 1; }
  int stop_action() const { return views; }
  int begin_token() const { return views + 1; }

  void validate() const;
  bool operator==(const AgentConfig&) const = default;
};

nlohmann::json agent_config_to_json(const AgentConfig& c);
AgentConfig agent_config_from_json(const nlohmann::json& j);

enum class Partition { kMl, kCl, kMomentum };

enum class ParamId : int {
  // supervised part
  kWordEmb,
  kEncFwWx, kEncFwWh, kEncFwB,
  kEncBwWx, kEncBwWh, kEncBwB,
  kInitW, kInitB,
  kAttnF,
  kActEmb,
  kCellWx, kCellWh, kCellB,
  kAttnU,
  kOutW, kOutB,
  kActW, kStopG,
  kCriticWo, kCriticWa, kCriticB1, kCriticW2, kCriticB2,
  // self-supervised part: query encoder, projections, bilinear maps
  kVisW, kVisB,
  kProjIl, kProjRl,
  kBilIl, kBilRl,
  // momentum key encoder and key critic
  kKeyVisW, kKeyVisB, kKeyProjIl,
  kKeyCriticWo, kKeyCriticWa, kKeyCriticB1, kKeyCriticW2, kKeyCriticB2, kKeyProjRl,
  kCount
};

inline constexpr std::size_t kParamCount = static_cast<std::size_t>(ParamId::kCount);

const char* param_name(ParamId id);
Partition param_partition(ParamId id);

/// (momentum copy, query source) pairs.
std::span<const std::pair<ParamId, ParamId>> encoder_momentum_pairs();
std::span<const std::pair<ParamId, ParamId>> critic_momentum_pairs();

/// FIFO of unit-norm key vectors.
class KeyQueue {
 public:
  explicit KeyQueue(std::size_t capacity = 256);

  void push(std::span<const double> key);
  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::deque<std::vector<double>>& entries() const { return entries_; }
  void clear() { entries_.clear(); }
  /// Restores entries verbatim (already unit norm), keeping the newest `capacity`.
  void restore(std::deque<std::vector<double>> entries);

  bool operator==(const KeyQueue&) const = default;

 private:
  std::size_t capacity_;
  std::deque<std::vector<double>> entries_;
};

class AgentParams {
 public:
  AgentParams() = default;
  AgentParams(const AgentConfig& config, std::uint64_t seed);

  const AgentConfig& config() const { return config_; }
  double momentum() const { return momentum_; }
  void set_momentum(double m);

  num::Parameter& operator[](ParamId id) { return params_[static_cast<std::size_t>(id)]; }
  const num::Parameter& operator[](ParamId id) const { return params_[static_cast<std::size_t>(id)]; }

  std::vector<num::Parameter*> partition(Partition part);
  std::vector<const num::Parameter*> partition(Partition part) const;
  std::vector<num::Parameter*> all();

  /// Marks a partition trainable or frozen; momentum copies are always frozen.
  void set_trainable(Partition part, bool trainable);

  KeyQueue queue_il;
  KeyQueue queue_rl;

 private:
  AgentConfig config_;
  double momentum_ = 0.99;
  std::array<num::Parameter, kParamCount> params_;
};

/// theta_k <- m theta_k + (1 - m) theta_q over the visual key encoder.
void momentum_update_encoder(AgentParams& params);
/// phi_k <- m phi_k + (1 - m) phi_q over the key critic.
void momentum_update_critic(AgentParams& params);

/// Lowercase hex SHA-256 over the raw values of one partition.
std::string partition_hash(const AgentParams& params, Partition part);

nlohmann::json params_to_json(const AgentParams& params);
AgentParams params_from_json(const nlohmann::json& j);

// ---- forward pass ----------------------------------------------------------

struct InstructionEncoding {
  num::Var features;  // tokens x hidden
  num::Var summary;   // hidden
};

InstructionEncoding encode_instruction(num::Tape& tape, AgentParams& params, std::span<const int> tokens);

/// Per-sector embeddings e = f W + b through the query (or momentum key) encoder.
num::Var encode_observation(num::Tape& tape, AgentParams& params, const num::Tensor& features,
                            bool key_encoder = false);

/// Sum over sectors of softmax(e_i^T W_F h) e_i.
num::Var attend_visual(num::Tape& tape, AgentParams& params, num::Var sector_embeddings, num::Var hidden);

struct DecoderState {
  num::Var hidden;
  int prev_action = -1;
  int step = 0;
};

DecoderState initial_state(num::Tape& tape, AgentParams& params, const InstructionEncoding& instr);

struct StepOutput {
  DecoderState state;
  num::Var logits;  // views + 1, non-navigable sectors masked to -1e9
};

StepOutput decode_step(num::Tape& tape, AgentParams& params, const DecoderState& state,
                       num::Var attended, num::Var sector_embeddings,
                       std::span<const std::uint8_t> navigable, num::Var instruction_features);

/// Critic input: [detached decoder hidden; mean sector embedding].
num::Var critic_embedding(num::Tape& tape, num::Var hidden, num::Var sector_embeddings);
/// Hidden layer for one action.
num::Var critic_hidden(num::Tape& tape, AgentParams& params, num::Var embedding, int action,
                       bool key_critic = false);
num::Var critic_q(num::Tape& tape, AgentParams& params, num::Var embedding, int action,
                  bool key_critic = false);
/// Q values for every action.
num::Var critic_q_all(num::Tape& tape, AgentParams& params, num::Var embedding, bool key_critic = false);

/// Unit-norm projections used as contrastive queries (or keys).
num::Var project_il(num::Tape& tape, AgentParams& params, num::Var pooled, bool key = false);
num::Var project_rl(num::Tape& tape, AgentParams& params, num::Var critic_hidden, bool key = false);

/// Softmax of the sector logits restricted to navigable sectors (no gradient).
std::vector<double> navigable_weights(num::Var logits, std::span<const std::uint8_t> navigable);

/// Weighted sum of sector embeddings with fixed weights.
num::Var pool_sectors(num::Tape& tape, num::Var sector_embeddings, std::span<const double> weights);

}  // namespace tvc::agent
