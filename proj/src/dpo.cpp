#include "temple/dpo.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "temple/error.hpp"
#include "temple/rng.hpp"

namespace temple {

namespace {

double stable_softplus(double x) {
  // log(1 + e^x) without overflow on either side.
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_pair(const ToyModel& model, const TokenPair& pair) {
  if (pair.context.size() != model.context_dim) {
    throw InputError("token pair context dimension " + std::to_string(pair.context.size()) +
                     " does not match model context_dim " + std::to_string(model.context_dim));
  }
  if (pair.chosen_tokens.empty() || pair.rejected_tokens.empty()) {
    throw InputError("token pair has an empty token sequence");
  }
}

void check_shapes(const ToyModel& model, const ToyModel& ref) {
  if (model.vocab_size != ref.vocab_size || model.context_dim != ref.context_dim) {
    throw InputError("policy and reference models have mismatched shapes");
  }
}

Eigen::VectorXd log_softmax(const Eigen::VectorXd& z) {
  const double m = z.maxCoeff();
  const double lse = m + std::log((z.array() - m).exp().sum());
  return z.array() - lse;
}

}  // namespace

ToyModel ToyModel::zeros(int vocab_size, int context_dim) {
  if (vocab_size < 2) throw InputError("vocab_size must be >= 2");
  if (context_dim < 1) throw InputError("context_dim must be >= 1");
  ToyModel m;
  m.vocab_size = vocab_size;
  m.context_dim = context_dim;
  m.theta = Eigen::MatrixXd::Zero(context_dim, vocab_size);
  return m;
}

Eigen::VectorXd ToyModel::logits(const Eigen::VectorXd& context) const {
  if (context.size() != context_dim) {
    throw InputError("context has dimension " + std::to_string(context.size()) + ", expected " +
                     std::to_string(context_dim));
  }
  return theta.transpose() * context;
}

double logprob(const ToyModel& model, const Eigen::VectorXd& context, const std::vector<int>& tokens) {
  if (tokens.empty()) throw InputError("cannot score an empty token sequence");
  const Eigen::VectorXd logp = log_softmax(model.logits(context));
  double total = 0.0;
  for (int t : tokens) {
    if (t < 0 || t >= model.vocab_size) {
      throw InputError("token id " + std::to_string(t) + " outside vocabulary of size " +
                       std::to_string(model.vocab_size));
    }
    total += logp(t);
  }
  return total;
}

Eigen::MatrixXd logprob_grad(const ToyModel& model, const Eigen::VectorXd& context,
                             const std::vector<int>& tokens) {
  if (tokens.empty()) throw InputError("cannot score an empty token sequence");
  const Eigen::VectorXd z = model.logits(context);
  const Eigen::VectorXd logp = log_softmax(z);
  const Eigen::VectorXd p = logp.array().exp();
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(model.vocab_size);
  for (int t : tokens) {
    if (t < 0 || t >= model.vocab_size) {
      throw InputError("token id " + std::to_string(t) + " outside vocabulary of size " +
                       std::to_string(model.vocab_size));
    }
    counts(t) += 1.0;
  }
  // d/d theta of sum_j log softmax(theta^T c)[t_j] = c (counts - n p)^T.
  const Eigen::VectorXd delta = counts - static_cast<double>(tokens.size()) * p;
  return context * delta.transpose();
}

double pair_margin(const ToyModel& model, const ToyModel& ref, const TokenPair& pair) {
  const double d_theta =
      logprob(model, pair.context, pair.chosen_tokens) - logprob(model, pair.context, pair.rejected_tokens);
  const double d_ref =
      logprob(ref, pair.context, pair.chosen_tokens) - logprob(ref, pair.context, pair.rejected_tokens);
  return d_theta - d_ref;
}

double dpo_loss(const ToyModel& model, const ToyModel& ref, const std::vector<TokenPair>& batch,
                double beta) {
  check_shapes(model, ref);
  if (batch.empty()) throw InputError("dpo_loss requires a non-empty batch");
  double total = 0.0;
  for (const TokenPair& pair : batch) {
    check_pair(model, pair);
    total += stable_softplus(-beta * pair_margin(model, ref, pair));
  }
  return total / static_cast<double>(batch.size());
}

Eigen::MatrixXd dpo_grad(const ToyModel& model, const ToyModel& ref, const std::vector<TokenPair>& batch,
                         double beta) {
  check_shapes(model, ref);
  if (batch.empty()) throw InputError("dpo_grad requires a non-empty batch");
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(model.context_dim, model.vocab_size);
  for (const TokenPair& pair : batch) {
    check_pair(model, pair);
    const double coeff = -beta * stable_sigmoid(-beta * pair_margin(model, ref, pair));
    const Eigen::MatrixXd diff = logprob_grad(model, pair.context, pair.chosen_tokens) -
                                 logprob_grad(model, pair.context, pair.rejected_tokens);
    grad += coeff * diff;
  }
  return grad / static_cast<double>(batch.size());
}

double sft_loss(const ToyModel& model, const std::vector<TokenPair>& batch) {
  if (batch.empty()) throw InputError("sft_loss requires a non-empty batch");
  double total = 0.0;
  for (const TokenPair& pair : batch) {
    check_pair(model, pair);
    total += -logprob(model, pair.context, pair.chosen_tokens);
  }
  return total / static_cast<double>(batch.size());
}

Eigen::MatrixXd sft_grad(const ToyModel& model, const std::vector<TokenPair>& batch) {
  if (batch.empty()) throw InputError("sft_grad requires a non-empty batch");
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(model.context_dim, model.vocab_size);
  for (const TokenPair& pair : batch) {
    check_pair(model, pair);
    grad -= logprob_grad(model, pair.context, pair.chosen_tokens);
  }
  return grad / static_cast<double>(batch.size());
}

double mean_margin(const ToyModel& model, const ToyModel& ref, const std::vector<TokenPair>& batch,
                   double beta) {
  check_shapes(model, ref);
  if (batch.empty()) throw InputError("mean_margin requires a non-empty batch");
  double total = 0.0;
  for (const TokenPair& pair : batch) {
    check_pair(model, pair);
    total += beta * pair_margin(model, ref, pair);
  }
  return total / static_cast<double>(batch.size());
}

const char* to_string(Objective o) {
  switch (o) {
    case Objective::kDpo: return "dpo";
    case Objective::kSft: return "sft";
  }
  throw InvariantError("unknown objective");
}

StageLog train_stage(ToyModel& model, const std::vector<TokenPair>& data, Objective objective,
                     const DpoConfig& cfg, const ToyModel& ref, int stage_index) {
  if (data.empty()) throw InputError("train_stage requires non-empty stage data");
  if (cfg.beta <= 0.0) throw InputError("beta must be > 0");
  if (cfg.steps_per_stage < 1) throw InputError("steps_per_stage must be >= 1");

  StageLog log;
  log.stage_index = stage_index;
  log.objective = objective;
  log.r = data.front().r;

  for (int step = 0; step < cfg.steps_per_stage; ++step) {
    double loss = 0.0;
    Eigen::MatrixXd grad;
    if (objective == Objective::kDpo) {
      loss = dpo_loss(model, ref, data, cfg.beta);
      grad = dpo_grad(model, ref, data, cfg.beta);
    } else {
      loss = sft_loss(model, data);
      grad = sft_grad(model, data);
    }
    const double margin = mean_margin(model, ref, data, cfg.beta);
    const double grad_norm = grad.norm();

    if (!std::isfinite(loss) || !std::isfinite(grad_norm)) {
      throw InvariantError("non-finite loss at stage " + std::to_string(stage_index) + " step " +
                           std::to_string(step) + " (loss=" + std::to_string(loss) + ")");
    }

    StepRecord rec;
    rec.stage = stage_index;
    rec.step = step;
    rec.objective = to_string(objective);
    rec.loss = loss;
    rec.margin = margin;
    rec.grad_norm = grad_norm;
    log.steps.push_back(rec);

    model.theta -= cfg.learning_rate * grad;
  }
  return log;
}

CurriculumOrder order_from_string(const std::string& s) {
  if (s == "dpo_then_sft") return CurriculumOrder::kDpoThenSft;
  if (s == "sft_then_dpo") return CurriculumOrder::kSftThenDpo;
  if (s == "sft_only") return CurriculumOrder::kSftOnly;
  if (s == "dpo_only") return CurriculumOrder::kDpoOnly;
  throw InputError("unknown curriculum order '" + s +
                   "' (expected dpo_then_sft, sft_then_dpo, sft_only, or dpo_only)");
}

const char* to_string(CurriculumOrder o) {
  switch (o) {
    case CurriculumOrder::kDpoThenSft: return "dpo_then_sft";
    case CurriculumOrder::kSftThenDpo: return "sft_then_dpo";
    case CurriculumOrder::kSftOnly: return "sft_only";
    case CurriculumOrder::kDpoOnly: return "dpo_only";
  }
  throw InvariantError("unknown curriculum order");
}

RunLog run_curriculum(ToyModel& model, const std::vector<StageData>& stages, CurriculumOrder order,
                      const DpoConfig& cfg) {
  if (stages.empty()) throw InputError("run_curriculum requires at least one stage");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    if (stages[i].pairs.empty()) {
      throw InputError("stage with r=" + std::to_string(stages[i].r) + " has no pairs");
    }
    if (i > 0 && stages[i].r >= stages[i - 1].r) {
      throw InputError("stage difficulty levels must strictly decrease");
    }
  }

  std::vector<Objective> passes;
  switch (order) {
    case CurriculumOrder::kDpoThenSft: passes = {Objective::kDpo, Objective::kSft}; break;
    case CurriculumOrder::kSftThenDpo: passes = {Objective::kSft, Objective::kDpo}; break;
    case CurriculumOrder::kSftOnly: passes = {Objective::kSft}; break;
    case CurriculumOrder::kDpoOnly: passes = {Objective::kDpo}; break;
  }

  const ToyModel ref = model;  // frozen at run start
  RunLog log;
  int stage_index = 0;
  for (Objective obj : passes) {
    for (const StageData& stage : stages) {
      StageLog sl = train_stage(model, stage.pairs, obj, cfg, ref, stage_index);
      sl.r = stage.r;
      log.stages.push_back(std::move(sl));
      ++stage_index;
    }
  }
  return log;
}

void write_runlog_jsonl(const std::filesystem::path& path, const RunLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open run log for writing: " + path.string());
  for (const StageLog& stage : log.stages) {
    for (const StepRecord& rec : stage.steps) {
      nlohmann::ordered_json j;
      j["stage"] = rec.stage;
      j["step"] = rec.step;
      j["objective"] = rec.objective;
      j["loss"] = rec.loss;
      j["margin"] = rec.margin;
      j["grad_norm"] = rec.grad_norm;
      out << j.dump() << "\n";
    }
  }
  if (!out) throw InputError("failed writing run log: " + path.string());
}

std::vector<TokenPair> synthetic_stage_pairs(int r, int n_pairs, int vocab_size, int context_dim,
                                             std::uint64_t seed) {
  if (r < 2) throw InputError("difficulty level must be >= 2");
  if (n_pairs < 1) throw InputError("n_pairs must be >= 1");
  if (vocab_size < 3) throw InputError("synthetic pairs need vocab_size >= 3");
  if (context_dim < 1) throw InputError("context_dim must be >= 1");

  constexpr int kLen = 6;
  // Corrupt more positions at easier (higher-r) levels so difficulty rises
  // as r falls: r=16 -> 6 flips, 8 -> 3, 4 -> 2, 2 -> 1.
  const int flips = std::max(1, std::min(kLen, (kLen * r + 15) / 16));

  SplitMix64 rng(seed);
  std::vector<TokenPair> pairs;
  pairs.reserve(static_cast<std::size_t>(n_pairs));
  for (int i = 0; i < n_pairs; ++i) {
    const int ctx = static_cast<int>(rng.below(static_cast<std::uint64_t>(context_dim)));
    TokenPair pair;
    pair.r = r;
    pair.context = Eigen::VectorXd::Zero(context_dim);
    pair.context(ctx) = 1.0;
    pair.chosen_tokens.resize(kLen);
    for (int j = 0; j < kLen; ++j) {
      pair.chosen_tokens[j] = (ctx * 3 + j) % vocab_size;
    }
    pair.rejected_tokens = pair.chosen_tokens;
    // Pick `flips` distinct positions (prefix of a partial Fisher-Yates pass).
    std::vector<int> pos(kLen);
    std::iota(pos.begin(), pos.end(), 0);
    for (int j = 0; j < flips; ++j) {
      const int k = j + static_cast<int>(rng.below(static_cast<std::uint64_t>(kLen - j)));
      std::swap(pos[j], pos[k]);
    }
    for (int j = 0; j < flips; ++j) {
      const int p = pos[j];
      const int old = pair.rejected_tokens[p];
      pair.rejected_tokens[p] =
          (old + 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(vocab_size - 1)))) % vocab_size;
    }
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

namespace {

std::vector<std::string> whitespace_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

}  // namespace

TokenPair tokenize_pair(const std::string& instruction, const std::string& chosen,
                        const std::string& rejected, int r, int vocab_size, int context_dim) {
  if (vocab_size < 2) throw InputError("vocab_size must be >= 2");
  if (context_dim < 1) throw InputError("context_dim must be >= 1");

  TokenPair pair;
  pair.r = r;
  pair.context = Eigen::VectorXd::Zero(context_dim);
  for (const std::string& tok : whitespace_tokens(instruction)) {
    pair.context(static_cast<int>(fnv1a64(tok) % static_cast<std::uint64_t>(context_dim))) += 1.0;
  }
  const double norm = pair.context.norm();
  if (norm > 0.0) {
    pair.context /= norm;
  } else {
    pair.context(0) = 1.0;
  }

  auto to_ids = [&](const std::string& text) {
    std::vector<int> ids;
    for (const std::string& tok : whitespace_tokens(text)) {
      ids.push_back(static_cast<int>(fnv1a64(tok) % static_cast<std::uint64_t>(vocab_size)));
    }
    if (ids.empty()) throw InputError("cannot tokenize empty response text");
    return ids;
  };
  pair.chosen_tokens = to_ids(chosen);
  pair.rejected_tokens = to_ids(rejected);
  return pair;
}

}  // namespace temple
