#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "swat/blocks.hpp"

namespace swat {

// One verification outcome. `pass` is redundant by construction:
// pass == (worst_case <= tolerance). Checks that must WITNESS a deviation
// (the permutation probe's sensitivity arm) store the negated deviation
// against a negated threshold so the same rule still reads "pass is small
// enough"; their tolerance is negative in reports.
struct CheckReport {
    std::string name;
    bool pass = false;
    double worst_case = 0.0;
    double tolerance = 0.0;
    std::vector<std::uint64_t> seeds_used;
    std::string detail;  // offending coordinate or note; empty when unremarkable
};

CheckReport make_report(std::string name, double worst_case, double tolerance,
                        std::vector<std::uint64_t> seeds, std::string detail = "");

bool all_pass(const std::vector<CheckReport>& reports);

// Stable-ordered CSV: name,status,worst_case,tolerance,seeds,detail with
// seeds ';'-joined inside one field.
void write_reports_csv(const std::string& path, const std::vector<CheckReport>& reports);

// ---- gradient checks ----

// Sabotage switch for the negative control: corrupts one analytic gradient
// entry after backward so the harness itself is seen to fail loudly.
enum class GradFault { none, corrupt };

// Central differences against the recorded backward pass, coordinate by
// coordinate over every leaf. `build_loss` must recompute the scalar loss
// from the leaves' current values on each call. The reported worst case is
// the relative error |a - n| / max(|a|, |n|, 1e-6); the floor makes the
// comparison absolute below 1e-6, where difference quotients are dominated
// by roundoff (~1e-12 per evaluation) and where gradients that are exactly
// zero by architecture would otherwise divide noise by noise. A non-finite
// analytic gradient fails immediately with its location.
CheckReport grad_check(const std::string& name, const std::vector<ParamEntry>& leaves,
                       const std::function<Tensor()>& build_loss, double eps = 1e-4,
                       double tol = 1e-5, GradFault fault = GradFault::none);

// Registered cases covering every differentiable op, layer, mixing sublayer,
// and two tiny end-to-end models. All probe points are reconditioned to
// moderate weight scales: finite differences need bounded curvature, and the
// default init drives layer norms into near-zero-variance regions whose
// third derivatives swamp an O(eps^2) quotient.
std::vector<std::string> grad_check_names();
CheckReport run_grad_check(const std::string& name, std::uint64_t seed,
                           GradFault fault = GradFault::none);
std::vector<CheckReport> run_grad_suite(std::uint64_t seed, GradFault fault = GradFault::none);

// ---- equivalence checks ----

// Named oracle pairs: reorderings of the same arithmetic (linear vs 1x1
// conv), independent loop references (conv, attention), exact structural
// round-trips, and the collapse of every structure-aware sublayer onto its
// baseline (zeroed conv branch, delta depthwise kernel, alpha = 1).
std::vector<std::string> equivalence_names();
CheckReport run_equivalence_check(const std::string& name, std::uint64_t seed, int trials = 20);
std::vector<CheckReport> run_equivalence_suite(std::uint64_t seed, int trials = 20);

// ---- permutation probe ----

// Max |logit delta| between a plain forward pass and one where the tokens
// were shuffled by `perm` right after tokenization.
double token_permutation_deviation(const Model& m, const TokenGrid& grid,
                                   const std::vector<int64_t>& perm);

// Applies n_perms random token permutations. With expect_invariance the
// report passes when every deviation stays at or below 1e-9; otherwise it
// passes when some permutation moves the logits by more than 1e-3 (stored
// negated, see CheckReport).
CheckReport permutation_probe(const Model& m, const Tensor& images, int n_perms,
                              std::uint64_t seed, bool expect_invariance);

// Shipped probe pair: a positional-embedding-free transformer, baseline vs
// the same model with the structure-aware channel mixer switched on. The
// baseline is a set operator over tokens; the depthwise stage in the swat
// channel mixer reads the token grid and must break that symmetry.
ModelConfig probe_invariance_config();
ModelConfig probe_sensitivity_config();
Tensor probe_images(const ModelConfig& cfg, int batch, std::uint64_t seed);

// Both arms over the shipped pair. The sensitivity arm takes the minimum
// over several model-init seeds so one lucky draw cannot carry it.
std::vector<CheckReport> run_permutation_suite(std::uint64_t seed);

// ---- attention maps ----

// Post-softmax attention of one transformer layer averaged over batch,
// heads, and query tokens: how much total attention each token receives,
// laid out on the token grid. layer -1 means the last layer. Mixers have no
// attention and throw ContractError.
Tensor attention_map(const Model& m, const Tensor& images, int layer = -1);

// attention_map, min-max normalized and written as a binary PGM.
void attention_dump(const Model& m, const Tensor& images, int layer, const std::string& path);

}  // namespace swat
