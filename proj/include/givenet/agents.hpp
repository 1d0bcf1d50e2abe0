#pragma once

#include "givenet/layers.hpp"
#include "givenet/parameter.hpp"
#include "givenet/tape.hpp"

#include <memory>
#include <string>
#include <vector>

namespace givenet {

enum class AgentKind { esbn, dot_product, lstm, transformer };

std::string to_string(AgentKind kind);
AgentKind parse_agent_kind(const std::string& name);

struct AgentConfig {
  int object_dim = 40;      // L
  int embedding_dim = 128;  // counter embedding width (memory values)
  int num_actions = 41;     // L + done
  int hidden = 512;         // LSTM controller units
  int key_dim = 256;        // ESBN key head units
  int heads = 8;            // transformer
  int mlp_hidden = 512;     // transformer
  bool mean_pool_readout = false;  // transformer: mean over positions instead of last row
  bool positional_encoding = true; // transformer
  bool write_at_t0 = true;         // ESBN: first memory write happens at t = 0
  double retrieval_gain = 1.0;     // ESBN: similarities are scaled by this before the softmax
  double forget_bias = 1.0;

  int transformer_width() const { return embedding_dim + object_dim; }
};

/// What one step of any agent produces.
struct AgentOutput {
  Var log_probs;     // log pi(. | history), on the episode tape
  Vec action_probs;  // exp(log_probs)
  Vec key_written;   // ESBN only: k_w of this step (empty otherwise)
  Vec read_weights;  // ESBN only: w_k of this step's read (empty at t = 0)
};

/// Common step interface: the trainer drives every architecture the same way.
/// State lives on the agent and refers to the tape passed to reset().
class Agent {
 public:
  virtual ~Agent() = default;

  virtual AgentKind kind() const = 0;
  /// Clears recurrent state, memory and history for a new episode.
  virtual void reset(Tape& tape) = 0;
  /// z is the counter embedding z_t, o the object vector o_t. With
  /// `object_only` every input except o_t is zeroed (select-ones phase).
  virtual AgentOutput step(Tape& tape, const Vec& z, const Vec& o, bool object_only) = 0;
  virtual ParamList parameters() = 0;

  int t() const { return t_; }
  const AgentConfig& config() const { return cfg_; }

  Checkpoint to_checkpoint(bool with_optimizer_state);
  void load_checkpoint(const Checkpoint& ckpt, bool with_optimizer_state);

 protected:
  explicit Agent(const AgentConfig& cfg) : cfg_(cfg) {}
  AgentOutput finish(Tape& tape, Var logits);

  AgentConfig cfg_;
  int t_ = 0;
};

/// LSTM controller over [k_r | z_t | o_t] with a key/value memory. Values
/// are count embeddings; keys come from a ReLU key head on the controller.
class EsbnAgent final : public Agent {
 public:
  EsbnAgent(const AgentConfig& cfg, RngStream& rng);

  AgentKind kind() const override { return AgentKind::esbn; }
  void reset(Tape& tape) override;
  AgentOutput step(Tape& tape, const Vec& z, const Vec& o, bool object_only) override;
  ParamList parameters() override;

  std::size_t memory_size() const { return keys_.size(); }
  const std::vector<Var>& memory_keys() const { return keys_; }
  const std::vector<Var>& memory_values() const { return values_; }
  Parameter& initial_key() { return init_key_; }
  Parameter& initial_value() { return init_value_; }

 private:
  LstmCell controller_;
  Linear action_head_;
  Linear key_head_;
  Parameter init_key_;
  Parameter init_value_;
  LstmState state_;
  std::vector<Var> keys_;
  std::vector<Var> values_;
};

/// LSTM controller over [cos(z_t, z_0) | o_t].
class DotProductAgent final : public Agent {
 public:
  DotProductAgent(const AgentConfig& cfg, RngStream& rng);

  AgentKind kind() const override { return AgentKind::dot_product; }
  void reset(Tape& tape) override;
  AgentOutput step(Tape& tape, const Vec& z, const Vec& o, bool object_only) override;
  ParamList parameters() override;

  double last_similarity() const { return last_similarity_; }

 private:
  LstmCell controller_;
  Linear action_head_;
  LstmState state_;
  Vec instruction_;
  double last_similarity_ = 0.0;
};

/// LSTM controller over [z_t | o_t].
class LstmAgent final : public Agent {
 public:
  LstmAgent(const AgentConfig& cfg, RngStream& rng);

  AgentKind kind() const override { return AgentKind::lstm; }
  void reset(Tape& tape) override;
  AgentOutput step(Tape& tape, const Vec& z, const Vec& o, bool object_only) override;
  ParamList parameters() override;

  Var hidden() const { return state_.h; }

 private:
  LstmCell controller_;
  Linear action_head_;
  LstmState state_;
};

/// One transformer encoder layer over the whole history of [z_t | o_t] rows
/// (plus sinusoidal positions); the action head reads the last position.
class TransformerAgent final : public Agent {
 public:
  TransformerAgent(const AgentConfig& cfg, RngStream& rng);

  AgentKind kind() const override { return AgentKind::transformer; }
  void reset(Tape& tape) override;
  AgentOutput step(Tape& tape, const Vec& z, const Vec& o, bool object_only) override;
  ParamList parameters() override;

  std::size_t history_length() const { return cache_.rows.size(); }
  /// Per-head attention row of the last readout position.
  const std::vector<Vec>& last_attention() const { return last_attention_; }
  TransformerLayer& layer() { return layer_; }

 private:
  TransformerLayer layer_;
  Linear action_head_;
  TransformerLayer::Cache cache_;
  std::vector<Vec> last_attention_;
};

std::unique_ptr<Agent> make_agent(AgentKind kind, const AgentConfig& cfg, RngStream& rng);

}  // namespace givenet
