#pragma once

#include "ctrllab/control.hpp"
#include "ctrllab/spectral.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ctrllab {

// Galerkin model y' = -A y + c u on the state (a_1..a_N, b_1..b_N) of sine coefficients,
// A = [[diag n^2, Q], [0, nu diag n^2]], c = (0, nu n sqrt(2/pi)). The adjoint generator is A^T.
struct GalerkinModel {
    int N = 0;
    double nu = 1.0;
    Eigen::MatrixXd A;
    Eigen::VectorXd c;

    static GalerkinModel build(const ProblemData& p, int N);
    Eigen::VectorXd pack(const VectorField2& f) const;
    VectorField2 unpack(const Eigen::VectorXd& v) const;
    // diagonal of the H^-1 Gram weights (1/n^2 on both components)
    Eigen::VectorXd hm1_weights() const;
};

// One step of length h: y1 = Phi y0 + G0 u0 + G1 u1 for u linear on the step, and
// y1 = Phi y0 + Q0 u0 + Qm u_mid + Q1 u1 for u quadratic on the step.
struct Propagator {
    double h = 0.0;
    Eigen::MatrixXd Phi;
    Eigen::VectorXd G0, G1;
    Eigen::VectorXd Q0, Qm, Q1;
};
Propagator make_propagator(const GalerkinModel& m, double h);

struct Trajectory {
    std::vector<double> t;
    std::vector<VectorField2> states;
    std::vector<double> norm_hm1, norm_l2;
    int N_sim = 0;

    const VectorField2& terminal() const { return states.back(); }
    void write_csv(std::ostream& os, bool modes = false) const;
};

// Exponential integrator on `steps` uniform steps. Controls with a closed form are integrated
// exactly; sampled controls are replaced on each step by the quadratic through u at the step's
// start, midpoint and end.
Trajectory forward(const VectorField2& y0, const ControlSignal& u, const ProblemData& p, int N_sim,
                   int steps = 2048);
Trajectory forward(const VectorField2& y0, const ControlSignal& u, const GalerkinModel& m, int steps = 2048);

// theta0 as a sine field or as a combination of (generalized) eigenfunctions.
struct AdjointTerm {
    double coeff = 1.0;
    EigenPair pair;
    bool generalized = false; // use the chain partner Phi_hat of a merged eigenvalue
};

struct AdjointInput {
    std::optional<VectorField2> field;
    std::vector<AdjointTerm> terms;

    static AdjointInput from_field(VectorField2 f);
    static AdjointInput eigen(const EigenPair& e, double coeff = 1.0, bool generalized = false);
    AdjointInput& add(const EigenPair& e, double coeff, bool generalized = false);
    bool closed_form() const { return !field.has_value(); }
    // theta(t) with s = T - t
    VectorField2 theta_at(double s) const;
    // B* D theta_x(0, t) = nu d/dx theta_2(0, t)
    double trace_at(double s) const;
    // time derivative d/dt theta at s
    VectorField2 dtheta_dt_at(double s) const;
};

struct AdjointTrajectory {
    Trajectory traj;
    std::vector<double> trace; // boundary observation at each time node
    bool closed_form = false;
    double trace_error = 0.0;  // Richardson check (generic input) or observation error bound
};

AdjointTrajectory adjoint(const AdjointInput& theta0, const ProblemData& p, double T, int N_sim,
                          int steps = 2048);
AdjointTrajectory adjoint(const AdjointInput& theta0, const GalerkinModel& m, double T, int steps = 2048);

// || theta_t - L* theta || / (1 + ||theta||) at time s before T, closed-form inputs only.
double adjoint_pde_residual(const AdjointInput& theta0, const ProblemData& p, double s);

struct DualityReport {
    double control_term = 0.0;  // int u B* D theta_x(0, t) dt
    double terminal_term = 0.0; // <y(T), theta0>
    double initial_term = 0.0;  // <y0, theta(0)>
    double residual = 0.0;
};

DualityReport duality_residual(const VectorField2& y0, const ControlSignal& u, const AdjointInput& theta0,
                               const ProblemData& p, double T, int N_sim, int steps = 2048);

struct ObservabilityReport {
    std::string theta0;
    double numerator = 0.0;   // ||theta(0)||^2_{H^1_0}
    double denominator = 0.0; // int_0^T |B* D theta_x(0, t)|^2 dt
    double ratio = 0.0;
    bool infinite = false;
    bool closed_form = false;
    double log10_ratio = 0.0;
    int index = 0;
};

ObservabilityReport observability_ratio(const AdjointInput& theta0, const ProblemData& p, double T,
                                        int N_sim = 0, int steps = 2048);

enum class Witness {
    Fast,          // psi_{1,k}
    PairDifference, // psi_{1,i_k} - psi_{2,k}, or psi_{1,k} - psi_{2,j_k} for sqrt(nu) < 1; Liouville pairs (k_p, j_p)
    RationalChain  // a Phi_hat + b Phi_2 with trace vanishing at t = T
};
std::string to_string(Witness w);

struct WitnessSequence {
    Witness kind = Witness::Fast;
    std::vector<int> indices; // k, l, or convergent index p
};

std::vector<ObservabilityReport> blowup_experiment(const ProblemData& p, double T, const WitnessSequence& seq);

struct NullControlReport {
    double relative_residual = 0.0; // ||y(T)||_{H^-1} / ||y0||_{H^-1}
    double norm_y0 = 0.0, norm_yT = 0.0;
    double controlled_residual = 0.0; // H^-1 norm of modes n <= K
    double tail_residual = 0.0;       // modes n > K
    double tail_decay = 0.0;          // exp(-lambda_{K+1} T)
    // max |<y(T), Phi>| / (||Phi|| ||y0||) over the eigenfunctions of the K-truncated spectrum
    double eigen_residual = 0.0;
    std::vector<double> terminal_first, terminal_second;
    int K = 0;
    int N_sim = 0;
};

NullControlReport verify_null_control(const VectorField2& y0, const ControlSignal& u, const ProblemData& p,
                                      double T, int N_sim, int steps = 2048);


} // namespace ctrllab
