#include "givenet/agents.hpp"

#include <cmath>

namespace givenet {

std::string to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::esbn: return "esbn";
    case AgentKind::dot_product: return "dot";
    case AgentKind::lstm: return "lstm";
    case AgentKind::transformer: return "transformer";
  }
  return "?";
}

AgentKind parse_agent_kind(const std::string& name) {
  if (name == "esbn") return AgentKind::esbn;
  if (name == "dot" || name == "dot_product" || name == "dot-product") return AgentKind::dot_product;
  if (name == "lstm") return AgentKind::lstm;
  if (name == "transformer") return AgentKind::transformer;
  throw ConfigError("unknown agent kind '" + name + "' (expected esbn, dot, lstm or transformer)");
}

AgentOutput Agent::finish(Tape& tape, Var logits) {
  AgentOutput out;
  out.log_probs = tape.log_softmax(logits);
  out.action_probs = tape.value(out.log_probs).array().exp();
  if (!out.action_probs.allFinite()) throw NumericError("agent produced non-finite action probabilities");
  ++t_;
  return out;
}

Checkpoint Agent::to_checkpoint(bool with_optimizer_state) {
  Checkpoint ck = make_checkpoint(parameters(), with_optimizer_state);
  ck.header["kind"] = "agent";
  ck.header["agent"] = to_string(kind());
  return ck;
}

void Agent::load_checkpoint(const Checkpoint& ckpt, bool with_optimizer_state) {
  auto it = ckpt.header.find("agent");
  if (it == ckpt.header.end() || it->second != to_string(kind()))
    throw ConfigError("checkpoint holds a different agent kind than " + to_string(kind()));
  restore_checkpoint(ckpt, parameters(), with_optimizer_state);
}

namespace {

void check_inputs(const AgentConfig& cfg, const Vec& z, const Vec& o) {
  require(z.size() == cfg.embedding_dim, "agent: count embedding width " + std::to_string(z.size()) +
                                             " != " + std::to_string(cfg.embedding_dim));
  require(o.size() == cfg.object_dim,
          "agent: object vector width " + std::to_string(o.size()) + " != " + std::to_string(cfg.object_dim));
}

}  // namespace

// --- ESBN ---

EsbnAgent::EsbnAgent(const AgentConfig& cfg, RngStream& rng)
    : Agent(cfg),
      controller_("esbn.controller", cfg.key_dim + cfg.embedding_dim + cfg.object_dim, cfg.hidden, rng,
                  cfg.forget_bias),
      action_head_("esbn.action_head", cfg.hidden, cfg.num_actions, true, rng),
      key_head_("esbn.key_head", cfg.hidden, cfg.key_dim, true, rng),
      init_key_("esbn.init_key", cfg.key_dim, 1),
      init_value_("esbn.init_value", cfg.embedding_dim, 1) {
  init_key_.init_uniform(rng, 1.0 / std::sqrt(static_cast<double>(cfg.key_dim)));
  init_value_.init_uniform(rng, 1.0 / std::sqrt(static_cast<double>(cfg.embedding_dim)));
}

void EsbnAgent::reset(Tape& tape) {
  t_ = 0;
  state_ = controller_.zero_state(tape);
  keys_.assign(1, tape.leaf(init_key_));
  values_.assign(1, tape.leaf(init_value_));
}

AgentOutput EsbnAgent::step(Tape& tape, const Vec& z, const Vec& o, bool object_only) {
  check_inputs(cfg_, z, o);
  const Var zv = tape.constant(object_only ? Vec::Zero(z.size()) : z);
  Var read;
  Vec weights;
  if (t_ == 0 || object_only) {
    read = tape.constant(Vec::Zero(cfg_.key_dim));
  } else {
    read = tape.cosine_read(zv, keys_, values_, &weights, cfg_.retrieval_gain);
  }
  state_ = controller_.forward(tape, tape.concat({read, zv, tape.constant(o)}), state_);
  const Var key = tape.relu(key_head_.forward(tape, state_.h));
  const bool write = cfg_.write_at_t0 || t_ > 0;
  AgentOutput out = finish(tape, action_head_.forward(tape, state_.h));
  out.key_written = tape.value(key);
  out.read_weights = std::move(weights);
  if (write) {
    keys_.push_back(key);
    values_.push_back(zv);
  }
  return out;
}

ParamList EsbnAgent::parameters() {
  ParamList out;
  controller_.collect(out);
  action_head_.collect(out);
  key_head_.collect(out);
  out.push_back(&init_key_);
  out.push_back(&init_value_);
  return out;
}

// --- dot product ---

DotProductAgent::DotProductAgent(const AgentConfig& cfg, RngStream& rng)
    : Agent(cfg),
      controller_("dot.controller", 1 + cfg.object_dim, cfg.hidden, rng, cfg.forget_bias),
      action_head_("dot.action_head", cfg.hidden, cfg.num_actions, true, rng) {}

void DotProductAgent::reset(Tape& tape) {
  t_ = 0;
  state_ = controller_.zero_state(tape);
  instruction_.resize(0);
}

AgentOutput DotProductAgent::step(Tape& tape, const Vec& z, const Vec& o, bool object_only) {
  check_inputs(cfg_, z, o);
  if (t_ == 0) instruction_ = z;
  if (instruction_.size() == 0) throw std::logic_error("dot-product agent stepped before reset");
  last_similarity_ = object_only ? 0.0 : cosine_similarity(z, instruction_);
  Vec input(1 + o.size());
  input(0) = last_similarity_;
  input.tail(o.size()) = o;
  state_ = controller_.forward(tape, tape.constant(std::move(input)), state_);
  return finish(tape, action_head_.forward(tape, state_.h));
}

ParamList DotProductAgent::parameters() {
  ParamList out;
  controller_.collect(out);
  action_head_.collect(out);
  return out;
}

// --- LSTM baseline ---

LstmAgent::LstmAgent(const AgentConfig& cfg, RngStream& rng)
    : Agent(cfg),
      controller_("lstm.controller", cfg.embedding_dim + cfg.object_dim, cfg.hidden, rng, cfg.forget_bias),
      action_head_("lstm.action_head", cfg.hidden, cfg.num_actions, true, rng) {}

void LstmAgent::reset(Tape& tape) {
  t_ = 0;
  state_ = controller_.zero_state(tape);
}

AgentOutput LstmAgent::step(Tape& tape, const Vec& z, const Vec& o, bool object_only) {
  check_inputs(cfg_, z, o);
  Vec input(z.size() + o.size());
  input.head(z.size()) = object_only ? Vec::Zero(z.size()) : z;
  input.tail(o.size()) = o;
  state_ = controller_.forward(tape, tape.constant(std::move(input)), state_);
  return finish(tape, action_head_.forward(tape, state_.h));
}

ParamList LstmAgent::parameters() {
  ParamList out;
  controller_.collect(out);
  action_head_.collect(out);
  return out;
}

// --- transformer baseline ---

TransformerAgent::TransformerAgent(const AgentConfig& cfg, RngStream& rng)
    : Agent(cfg),
      layer_("transformer.layer", cfg.transformer_width(), cfg.heads, cfg.mlp_hidden, rng),
      action_head_("transformer.action_head", cfg.transformer_width(), cfg.num_actions, true, rng) {}

void TransformerAgent::reset(Tape& /*tape*/) {
  t_ = 0;
  cache_ = {};
  last_attention_.clear();
}

AgentOutput TransformerAgent::step(Tape& tape, const Vec& z, const Vec& o, bool object_only) {
  check_inputs(cfg_, z, o);
  const Eigen::Index width = cfg_.transformer_width();
  Vec row(width);
  row.head(z.size()) = object_only ? Vec::Zero(z.size()) : z;
  row.tail(o.size()) = o;
  if (cfg_.positional_encoding) row += positional_encoding(t_, width);
  const Var rv = tape.constant(std::move(row));
  Var readout;
  if (cfg_.mean_pool_readout) {
    std::vector<Var> seq = cache_.rows;
    seq.push_back(rv);
    cache_.rows = seq;
    std::vector<std::vector<Vec>> attention;
    const std::vector<Var> outs = layer_.forward(tape, seq, &attention);
    last_attention_ = attention.back();
    readout = outs.front();
    for (std::size_t i = 1; i < outs.size(); ++i) readout = tape.add(readout, outs[i]);
    readout = tape.scale(readout, 1.0 / static_cast<double>(outs.size()));
  } else {
    readout = layer_.forward_last(tape, cache_, rv, &last_attention_);
  }
  return finish(tape, action_head_.forward(tape, readout));
}

ParamList TransformerAgent::parameters() {
  ParamList out;
  layer_.collect(out);
  action_head_.collect(out);
  return out;
}

std::unique_ptr<Agent> make_agent(AgentKind kind, const AgentConfig& cfg, RngStream& rng) {
  require(cfg.object_dim >= 1 && cfg.embedding_dim >= 1 && cfg.num_actions >= 2, "agent dimensions must be positive");
  switch (kind) {
    case AgentKind::esbn: return std::make_unique<EsbnAgent>(cfg, rng);
    case AgentKind::dot_product: return std::make_unique<DotProductAgent>(cfg, rng);
    case AgentKind::lstm: return std::make_unique<LstmAgent>(cfg, rng);
    case AgentKind::transformer: return std::make_unique<TransformerAgent>(cfg, rng);
  }
  throw ConfigError("unknown agent kind");
}

}  // namespace givenet
