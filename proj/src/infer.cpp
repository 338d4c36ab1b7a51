#include "gmap/infer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gmap/mrf.hpp"
#include "gmap/rng.hpp"

namespace gmap {

namespace {

constexpr double kPiFloor = 1e-8;
constexpr double kEpsFloor = 1e-6;
constexpr double kEpsCeil = 0.5;

double entropy_term(double q) {
    double h = 0.0;
    if (q > 0.0) h -= q * std::log(q);
    if (q < 1.0) h -= (1.0 - q) * std::log(1.0 - q);
    return h;
}

double sigmoid(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

void check_dims(const std::vector<LabelMap>& subjects, const LabelMap& x) {
    if (subjects.empty()) throw std::invalid_argument("no subjects");
    for (const auto& y : subjects)
        if (y.dims != x.dims || y.num_labels != x.num_labels)
            throw std::invalid_argument("subject/x dims mismatch");
}

// One sequential sweep of the q update with the optional mean-field
// neighbor terms; exact coordinate ascent on the full bound.
void update_q_coupled(const LabelMap& subject, const LabelMap& x,
                      const ModelParams& params, GridXd& q) {
    const int K = x.num_labels;
    std::array<int, 8> nb;
    double* qv = q.data();
    for (int s = 0; s < x.dims.size(); ++s) {
        const auto [a, b] = log_lik_terms(subject(s), x(s), params, K);
        const int n = neighbors(s, x.dims, nb);
        double coupling = 0.0;
        for (int j = 0; j < n; ++j) coupling += 1.0 - 2.0 * qv[nb[j]];
        qv[s] = sigmoid(b - a - params.beta_h * coupling);
    }
}

}  // namespace

ModelParams default_initial_params(int K) {
    ModelParams p;
    p.pi.assign(K, 1.0 / K);
    p.epsilon = 0.05;
    p.beta_x = 0.5;
    p.beta_h = 0.5;
    return p;
}

LabelMap init_random(LatticeDims dims, int K, std::uint64_t seed) {
    if (K < 2) throw std::invalid_argument("K must be >= 2");
    Rng rng(seed);
    std::uniform_int_distribution<int> pick(0, K - 1);
    LabelMap x(dims, K);
    for (int s = 0; s < dims.size(); ++s) x(s) = pick(rng);
    return x;
}

LabelMap init_greedy(const std::vector<LabelMap>& subjects) {
    if (subjects.empty()) throw std::invalid_argument("no subjects");
    const LatticeDims dims = subjects.front().dims;
    const int K = subjects.front().num_labels;
    LabelMap x(dims, K);
    std::vector<int> count(K);
    for (int s = 0; s < dims.size(); ++s) {
        std::fill(count.begin(), count.end(), 0);
        for (const auto& y : subjects) ++count[y(s)];
        int best = 0, best_count = 0;
        for (int k = 1; k < K; ++k)
            if (count[k] > best_count) {
                best = k;
                best_count = count[k];
            }
        x(s) = best;
    }
    return x;
}

ModelParams floor_params(ModelParams params, Model model) {
    double sum = 0.0;
    for (auto& p : params.pi) {
        p = std::max(p, kPiFloor);
        sum += p;
    }
    for (auto& p : params.pi) p /= sum;
    if (model == Model::I)
        params.epsilon = kEpsFloor;
    else
        params.epsilon = std::clamp(params.epsilon, kEpsFloor, kEpsCeil);
    return params;
}

std::pair<double, double> log_lik_terms(int y, int x, const ModelParams& params,
                                        int K) {
    const double a = (y == x) ? std::log1p(-params.epsilon)
                              : std::log(params.epsilon / (K - 1));
    const double b = std::log(params.pi[y]);
    return {a, b};
}

GridXd vb_update_q(const LabelMap& subject, const LabelMap& x,
                   const ModelParams& params) {
    if (subject.dims != x.dims) throw std::invalid_argument("dims mismatch");
    const int K = x.num_labels;
    GridXd q(x.dims.rows, x.dims.cols);
    double* qv = q.data();
    for (int s = 0; s < x.dims.size(); ++s) {
        const auto [a, b] = log_lik_terms(subject(s), x(s), params, K);
        qv[s] = sigmoid(b - a);
    }
    return q;
}

GridXd vb_fit_q(const LabelMap& subject, const LabelMap& x,
                const ModelParams& params, bool coupling, int sweeps) {
    GridXd q = vb_update_q(subject, x, params);
    if (coupling)
        for (int sweep = 0; sweep < sweeps; ++sweep)
            update_q_coupled(subject, x, params, q);
    return q;
}

namespace {

// Shared X sweep: weight w_is multiplies the propagation likelihood of
// subject i at voxel s (1 - q_is for VB, the H=0 indicator for ICM).
template <typename WeightFn>
LabelMap update_x_impl(const std::vector<LabelMap>& subjects, const LabelMap& x,
                       const ModelParams& params, WeightFn weight,
                       bool sequential) {
    const int K = x.num_labels;
    const int M = static_cast<int>(subjects.size());
    const double log_eq = std::log1p(-params.epsilon);
    const double log_neq = std::log(params.epsilon / (K - 1));

    LabelMap out = x;
    const LabelMap& ref = sequential ? out : x;
    std::array<int, 8> nb;
    std::vector<double> wsum(K);
    std::vector<int> nbcount(K);
    for (int s = 0; s < x.dims.size(); ++s) {
        std::fill(wsum.begin(), wsum.end(), 0.0);
        double wtotal = 0.0;
        for (int i = 0; i < M; ++i) {
            const double w = weight(i, s);
            wsum[subjects[i](s)] += w;
            wtotal += w;
        }
        const int n = neighbors(s, x.dims, nb);
        std::fill(nbcount.begin(), nbcount.end(), 0);
        for (int j = 0; j < n; ++j) ++nbcount[ref(nb[j])];

        int best = 0;
        double best_score = 0.0;
        for (int k = 0; k < K; ++k) {
            const double score = log_neq * (wtotal - wsum[k]) + log_eq * wsum[k] -
                                 params.beta_x * (n - nbcount[k]);
            if (k == 0 || score > best_score) {
                best = k;
                best_score = score;
            }
        }
        out(s) = best;
    }
    return out;
}

}  // namespace

LabelMap vb_update_x(const std::vector<LabelMap>& subjects,
                     const VariationalPosterior& q, const LabelMap& x,
                     const ModelParams& params, bool sequential) {
    check_dims(subjects, x);
    return update_x_impl(
        subjects, x, params,
        [&](int i, int s) { return 1.0 - q.q[i].data()[s]; }, sequential);
}

LabelMap icm_update_x(const std::vector<LabelMap>& subjects,
                      const std::vector<BinaryMask>& masks, const LabelMap& x,
                      const ModelParams& params, bool sequential) {
    check_dims(subjects, x);
    return update_x_impl(
        subjects, x, params,
        [&](int i, int s) { return masks[i](s) == 0 ? 1.0 : 0.0; }, sequential);
}

ModelParams vb_update_theta(const std::vector<LabelMap>& subjects,
                            const LabelMap& x, const VariationalPosterior& q,
                            const ModelParams& current, Model model) {
    check_dims(subjects, x);
    const int K = x.num_labels;
    const int M = static_cast<int>(subjects.size());

    ModelParams next = current;

    // pi: Dirichlet(1) posterior mean with expected masked counts.
    std::vector<double> counts(K, 0.0);
    double mismatches = 0.0, propagated = 0.0;
    for (int i = 0; i < M; ++i) {
        const double* qv = q.q[i].data();
        for (int s = 0; s < x.dims.size(); ++s) {
            counts[subjects[i](s)] += qv[s];
            const double w = 1.0 - qv[s];
            propagated += w;
            if (subjects[i](s) != x(s)) mismatches += w;
        }
    }
    double total = 0.0;
    for (double c : counts) total += c;
    for (int k = 0; k < K; ++k) next.pi[k] = (1.0 + counts[k]) / (K + total);

    // epsilon: Beta(1,10) posterior mean over propagated voxels.
    if (propagated > 0.0)
        next.epsilon = (1.0 + mismatches) / (11.0 + propagated);
    else
        next.epsilon = 1.0 / 11.0;

    next.beta_x = estimate_beta_pseudolikelihood(x, K);

    // beta_H from hard-thresholded q, averaged over subjects.
    double beta_h_sum = 0.0;
    for (int i = 0; i < M; ++i) {
        LabelMap h(x.dims, 2);
        const double* qv = q.q[i].data();
        for (int s = 0; s < x.dims.size(); ++s) h(s) = qv[s] >= 0.5 ? 1 : 0;
        beta_h_sum += estimate_beta_pseudolikelihood(h, 2);
    }
    next.beta_h = beta_h_sum / M;

    return floor_params(next, model);
}

double compute_elbo(const std::vector<LabelMap>& subjects, const LabelMap& x,
                    const VariationalPosterior& q, const ModelParams& params,
                    bool include_mask_prior) {
    check_dims(subjects, x);
    const int K = x.num_labels;
    double f = 0.0;
    for (int i = 0; i < static_cast<int>(subjects.size()); ++i) {
        const double* qv = q.q[i].data();
        for (int s = 0; s < x.dims.size(); ++s) {
            const auto [a, b] = log_lik_terms(subjects[i](s), x(s), params, K);
            f += (1.0 - qv[s]) * a + qv[s] * b + entropy_term(qv[s]);
        }
        if (include_mask_prior) {
            // Expected pair disagreement under the factorized posterior.
            const LatticeDims dims = x.dims;
            for (int r = 0; r < dims.rows; ++r)
                for (int c = 0; c < dims.cols; ++c) {
                    const double qs = qv[r * dims.cols + c];
                    auto add = [&](int rr, int cc) {
                        const double qr = qv[rr * dims.cols + cc];
                        f -= params.beta_h * (qs * (1.0 - qr) + (1.0 - qs) * qr);
                    };
                    if (c + 1 < dims.cols) add(r, c + 1);
                    if (r + 1 < dims.rows) {
                        add(r + 1, c);
                        if (c + 1 < dims.cols) add(r + 1, c + 1);
                        if (c - 1 >= 0) add(r + 1, c - 1);
                    }
                }
        }
    }
    f -= disagreement_energy(x, params.beta_x);
    return f;
}

InferenceState run_vb(const std::vector<LabelMap>& subjects, const LabelMap& x0,
                      const ModelParams& params0, const InferenceOptions& options,
                      const IterationCallback& on_iteration) {
    check_dims(subjects, x0);
    const int M = static_cast<int>(subjects.size());

    InferenceState state;
    state.x = x0;
    state.params = floor_params(params0, options.model);
    state.q.dims = x0.dims;
    state.q.q.assign(M, GridXd::Constant(x0.dims.rows, x0.dims.cols, 0.5));
    if (options.q_init_from_x) {
        for (int i = 0; i < M; ++i) {
            if (options.q_prior_coupling)
                update_q_coupled(subjects[i], state.x, state.params, state.q.q[i]);
            else
                state.q.q[i] = vb_update_q(subjects[i], state.x, state.params);
        }
    }

    for (int iter = 0; iter < options.max_iterations; ++iter) {
        // X before q: on the first pass the uncommitted q = 1/2 makes the X
        // sweep an unweighted vote across subjects, so a random start is not
        // locked in the way a hard mask assignment would lock it.
        state.x = vb_update_x(subjects, state.q, state.x, state.params,
                              options.sequential_x_update);
        for (int i = 0; i < M; ++i) {
            if (options.q_prior_coupling)
                update_q_coupled(subjects[i], state.x, state.params, state.q.q[i]);
            else
                state.q.q[i] = vb_update_q(subjects[i], state.x, state.params);
        }
        if (options.estimate_theta)
            state.params = vb_update_theta(subjects, state.x, state.q,
                                           state.params, options.model);

        // The traced bound matches the q update in force: the default update
        // ascends the bound without the mask-prior coupling term.
        const double f = compute_elbo(subjects, state.x, state.q, state.params,
                                      options.q_prior_coupling);
        if (!std::isfinite(f))
            throw std::runtime_error("non-finite variational bound; "
                                     "probability floor violated");
        state.elbo_trace.push_back(f);
        state.iterations = iter + 1;
        if (on_iteration) on_iteration(state.iterations, state.x);

        if (state.elbo_trace.size() >= 2) {
            const double prev = state.elbo_trace[state.elbo_trace.size() - 2];
            if (std::abs(f - prev) <
                options.convergence_tol * std::max(1.0, std::abs(f)))
                break;
        }
    }
    return state;
}

BinaryMask icm_update_h(const LabelMap& subject, const LabelMap& x,
                        const ModelParams& params, const BinaryMask& current) {
    if (subject.dims != x.dims || current.dims != x.dims)
        throw std::invalid_argument("dims mismatch");
    const int K = x.num_labels;
    BinaryMask h = current;
    std::array<int, 8> nb;
    for (int s = 0; s < x.dims.size(); ++s) {
        const auto [a, b] = log_lik_terms(subject(s), x(s), params, K);
        const int n = neighbors(s, x.dims, nb);
        int ones = 0;
        for (int j = 0; j < n; ++j) ones += h(nb[j]);
        const double score0 = a - params.beta_h * ones;
        const double score1 = b - params.beta_h * (n - ones);
        h(s) = score1 > score0 ? 1 : 0;
    }
    return h;
}

double icm_log_posterior(const std::vector<LabelMap>& subjects,
                         const std::vector<BinaryMask>& masks, const LabelMap& x,
                         const ModelParams& params) {
    check_dims(subjects, x);
    const int K = x.num_labels;
    double lp = 0.0;
    for (int i = 0; i < static_cast<int>(subjects.size()); ++i) {
        for (int s = 0; s < x.dims.size(); ++s) {
            const auto [a, b] = log_lik_terms(subjects[i](s), x(s), params, K);
            lp += masks[i](s) == 0 ? a : b;
        }
        lp -= disagreement_energy(masks[i], params.beta_h);
    }
    lp -= disagreement_energy(x, params.beta_x);
    return lp;
}

InferenceState run_icm(const std::vector<LabelMap>& subjects, const LabelMap& x0,
                       const ModelParams& params0, const InferenceOptions& options,
                       const IterationCallback& on_iteration) {
    check_dims(subjects, x0);
    const int M = static_cast<int>(subjects.size());

    InferenceState state;
    state.x = x0;
    state.params = floor_params(params0, options.model);
    state.masks.assign(M, BinaryMask(x0.dims));

    for (int iter = 0; iter < options.max_iterations; ++iter) {
        int changes = 0;
        for (int i = 0; i < M; ++i) {
            BinaryMask h = icm_update_h(subjects[i], state.x, state.params,
                                        state.masks[i]);
            changes += (h.values - state.masks[i].values).cwiseAbs().sum();
            state.masks[i] = std::move(h);
        }
        LabelMap x = icm_update_x(subjects, state.masks, state.x, state.params,
                                  options.sequential_x_update);
        changes += static_cast<int>(
            (x.values.array() != state.x.values.array()).count());
        state.x = std::move(x);
        if (options.estimate_theta) {
            // theta step reuses the VB update with hard 0/1 posteriors.
            VariationalPosterior q;
            q.dims = state.x.dims;
            q.q.reserve(M);
            for (int i = 0; i < M; ++i)
                q.q.push_back(state.masks[i].values.cast<double>());
            state.params = vb_update_theta(subjects, state.x, q, state.params,
                                           options.model);
        }
        state.elbo_trace.push_back(
            icm_log_posterior(subjects, state.masks, state.x, state.params));
        state.iterations = iter + 1;
        if (on_iteration) on_iteration(state.iterations, state.x);
        if (changes == 0) break;
    }
    return state;
}

}  // namespace gmap
