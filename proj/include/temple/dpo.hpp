#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace temple {

// Minimal differentiable policy: context-conditioned categorical sequence
// model. Logits for a context c are theta^T c; token positions are
// independent given the context.
struct ToyModel {
  int vocab_size = 2;
  int context_dim = 1;
  Eigen::MatrixXd theta;  // context_dim x vocab_size

  static ToyModel zeros(int vocab_size, int context_dim);
  Eigen::VectorXd logits(const Eigen::VectorXd& context) const;
};

struct TokenPair {
  Eigen::VectorXd context;
  std::vector<int> chosen_tokens;
  std::vector<int> rejected_tokens;
  int r = 2;  // difficulty metadata for staging
};

struct DpoConfig {
  double beta = 0.1;
  double learning_rate = 1e-2;
  int steps_per_stage = 500;
  std::uint64_t seed = 0;
};

// Sum over positions of log softmax(theta^T c)[token]; always <= 0.
double logprob(const ToyModel& model, const Eigen::VectorXd& context, const std::vector<int>& tokens);

// d logprob / d theta, same shape as theta.
Eigen::MatrixXd logprob_grad(const ToyModel& model, const Eigen::VectorXd& context,
                             const std::vector<int>& tokens);

// Preference margin of one pair: (logp_theta(ch) - logp_theta(rej)) -
// (logp_ref(ch) - logp_ref(rej)).
double pair_margin(const ToyModel& model, const ToyModel& ref, const TokenPair& pair);

// Mean over the batch of -log sigmoid(beta * margin); ln 2 at zero margin.
double dpo_loss(const ToyModel& model, const ToyModel& ref, const std::vector<TokenPair>& batch, double beta);

// Exact analytic gradient of dpo_loss w.r.t. theta.
Eigen::MatrixXd dpo_grad(const ToyModel& model, const ToyModel& ref, const std::vector<TokenPair>& batch,
                         double beta);

// Mean negative log-likelihood of the chosen sequences.
double sft_loss(const ToyModel& model, const std::vector<TokenPair>& batch);
Eigen::MatrixXd sft_grad(const ToyModel& model, const std::vector<TokenPair>& batch);

// Mean beta-scaled margin over the batch (the logged "reward margin").
double mean_margin(const ToyModel& model, const ToyModel& ref, const std::vector<TokenPair>& batch, double beta);

enum class Objective { kDpo, kSft };
const char* to_string(Objective o);

struct StepRecord {
  int stage = 0;
  int step = 0;
  std::string objective;
  double loss = 0.0;
  double margin = 0.0;
  double grad_norm = 0.0;
};

struct StageLog {
  int stage_index = 0;
  Objective objective = Objective::kDpo;
  int r = 0;
  std::vector<StepRecord> steps;
};

struct RunLog {
  std::vector<StageLog> stages;
};

// Full-batch gradient descent for cfg.steps_per_stage steps; records loss,
// mean reward margin and gradient norm before each update. Aborts on a
// non-finite loss.
StageLog train_stage(ToyModel& model, const std::vector<TokenPair>& data, Objective objective,
                     const DpoConfig& cfg, const ToyModel& ref, int stage_index);

enum class CurriculumOrder { kDpoThenSft, kSftThenDpo, kSftOnly, kDpoOnly };

CurriculumOrder order_from_string(const std::string& s);
const char* to_string(CurriculumOrder o);

struct StageData {
  int r = 0;
  std::vector<TokenPair> pairs;
};

// Executes the stages (already sorted by strictly decreasing r) in the
// declared objective order. The reference model is a frozen copy of theta
// at run start.
RunLog run_curriculum(ToyModel& model, const std::vector<StageData>& stages, CurriculumOrder order,
                      const DpoConfig& cfg);

void write_runlog_jsonl(const std::filesystem::path& path, const RunLog& log);

// Synthetic separable preference pairs: rejected sequences corrupt the
// chosen pattern in a number of positions that grows with r, so every
// difficulty level is learnable.
std::vector<TokenPair> synthetic_stage_pairs(int r, int n_pairs, int vocab_size, int context_dim,
                                             std::uint64_t seed);

// Non-semantic hashing tokenizer for smoke-testing real text pairs on the
// toy model: whitespace tokens hash to ids mod vocab_size; the instruction
// hashes to a normalized bag-of-words context.
TokenPair tokenize_pair(const std::string& instruction, const std::string& chosen,
                        const std::string& rejected, int r, int vocab_size, int context_dim);

}  // namespace temple
