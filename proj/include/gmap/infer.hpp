#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "gmap/forward.hpp"
#include "gmap/lattice.hpp"

namespace gmap {

// Per-subject, per-voxel probability that the mask is on (H_i(s) = 1).
struct VariationalPosterior {
    LatticeDims dims;
    std::vector<GridXd> q;  // one grid per subject

    int num_subjects() const { return static_cast<int>(q.size()); }
    double operator()(int i, int s) const { return q[i].data()[s]; }
    double& operator()(int i, int s) { return q[i].data()[s]; }
};

enum class Algo { Icm, Vb };

struct InferenceOptions {
    int max_iterations = 200;        // default 100 for ICM callers
    double convergence_tol = 1e-6;   // relative on F (VB); ICM stops at zero changes
    bool estimate_theta = true;
    Model model = Model::II;
    std::uint64_t seed = 0;
    bool q_prior_coupling = false;   // mean-field neighbor terms in the q update
    bool sequential_x_update = true; // Gauss-Seidel raster; false = Jacobi
    // Commit q to the initial X before the first sweep. Default off: the
    // first X update then votes with uncommitted q = 1/2, which keeps a
    // random start from being locked in. On: the start fully seeds the
    // basin, useful for deliberate multi-start exploration.
    bool q_init_from_x = false;
};

struct InferenceState {
    LabelMap x;
    VariationalPosterior q;          // VB
    std::vector<BinaryMask> masks;   // ICM
    ModelParams params;
    std::vector<double> elbo_trace;  // F per iteration (VB); joint log-posterior (ICM)
    int iterations = 0;
};

using IterationCallback = std::function<void(int iteration, const LabelMap& x)>;

// Uniform pi, epsilon 0.05, beta_X = beta_H = 0.5.
ModelParams default_initial_params(int K);

LabelMap init_random(LatticeDims dims, int K, std::uint64_t seed);

// Per voxel, the most frequent nonzero label among the subjects; 0 if none.
LabelMap init_greedy(const std::vector<LabelMap>& subjects);

// A = log P(y | propagated from x), B = log P(y | masked, drawn from pi).
std::pair<double, double> log_lik_terms(int y, int x, const ModelParams& params,
                                        int K);

// Floors applied before any log: pi_k >= 1e-8 (renormalized), epsilon
// clamped to [1e-6, 0.5]. Model I inference pins epsilon at the floor.
ModelParams floor_params(ModelParams params, Model model);

GridXd vb_update_q(const LabelMap& subject, const LabelMap& x,
                   const ModelParams& params);

// Iterated q updates at a fixed X (a q-only fit), with or without the
// neighbor coupling terms. Without coupling one sweep is already the
// fixed point.
GridXd vb_fit_q(const LabelMap& subject, const LabelMap& x,
                const ModelParams& params, bool coupling, int sweeps = 50);

LabelMap vb_update_x(const std::vector<LabelMap>& subjects,
                     const VariationalPosterior& q, const LabelMap& x,
                     const ModelParams& params, bool sequential = true);

ModelParams vb_update_theta(const std::vector<LabelMap>& subjects,
                            const LabelMap& x, const VariationalPosterior& q,
                            const ModelParams& current, Model model);

// Jensen lower bound F. The mask-prior expectation (the beta_H coupling term)
// is excluded when include_mask_prior is false; that reduced bound is the
// objective the default q update ascends exactly.
double compute_elbo(const std::vector<LabelMap>& subjects, const LabelMap& x,
                    const VariationalPosterior& q, const ModelParams& params,
                    bool include_mask_prior = true);

InferenceState run_vb(const std::vector<LabelMap>& subjects, const LabelMap& x0,
                      const ModelParams& params0, const InferenceOptions& options,
                      const IterationCallback& on_iteration = {});

BinaryMask icm_update_h(const LabelMap& subject, const LabelMap& x,
                        const ModelParams& params, const BinaryMask& current);

LabelMap icm_update_x(const std::vector<LabelMap>& subjects,
                      const std::vector<BinaryMask>& masks, const LabelMap& x,
                      const ModelParams& params, bool sequential = true);

// Unnormalized joint log-posterior log P(Y, X, H | theta) up to constants.
double icm_log_posterior(const std::vector<LabelMap>& subjects,
                         const std::vector<BinaryMask>& masks, const LabelMap& x,
                         const ModelParams& params);

InferenceState run_icm(const std::vector<LabelMap>& subjects, const LabelMap& x0,
                       const ModelParams& params0, const InferenceOptions& options,
                       const IterationCallback& on_iteration = {});

}  // namespace gmap
