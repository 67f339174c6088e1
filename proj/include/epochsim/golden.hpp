#pragma once

// Floating-point reference implementation of S4 / Liquid-S4 layer math:
// ZOH discretization, the diagonal recurrences, the linear readout, and the
// functional nonlinearities. Every simulated run is checked against this.

#include <complex>
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace epochsim {

using Complex = std::complex<double>;
using CVec = std::vector<Complex>;

struct RealMatrix {
    int64_t rows = 0;
    int64_t cols = 0;
    std::vector<double> data;  // row-major

    RealMatrix() = default;
    RealMatrix(int64_t r, int64_t c) : rows(r), cols(c), data(static_cast<size_t>(r * c), 0.0) {}

    double& at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * cols + c)]; }
    double at(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * cols + c)]; }
};

// Continuous-time layer symbols: diag(lambda), input map B, readout C, the
// optional skip D, and the step size dt.
struct SsmLayerParams {
    int n = 0;
    int h = 1;
    CVec lambda;                            // length n, Re > 0
    CVec b;                                 // length n
    CVec c;                                 // h*n, row-major: c[head*n + j]
    std::optional<std::vector<double>> d;   // per-head skip, optional
    double dt = 1.0;
};

void validate_params(const SsmLayerParams& p);

struct DiscreteCoeffs {
    CVec abar;
    CVec bbar;
};

// abar_i = exp(-lambda_i dt);  bbar_i = (1 - exp(-lambda_i dt)) b_i / lambda_i.
// Rejects lambda_i == 0.
DiscreteCoeffs discretize(const SsmLayerParams& p);

using StateVector = CVec;

StateVector s4_step(const StateVector& x, double u, const DiscreteCoeffs& c);
StateVector liquid_step(const StateVector& x, double u, const DiscreteCoeffs& c);

// y_h = Re(sum_j C[h,j] x_j) + D_h u. The projection takes the real part.
std::vector<double> linear_out(const StateVector& x, double u, const SsmLayerParams& p);

enum class SsmVariant { S4, Liquid };

// Runs one layer from a zero state: for every step, state update then
// readout. Returns T x H outputs.
RealMatrix run_layer(const SsmLayerParams& p, std::span<const double> u, SsmVariant variant);

enum class Activation { Relu, Silu, Sigmoid, Tanh };

double activation_scalar(double x, Activation f);
std::vector<double> apply_activation(std::span<const double> v, Activation f);

// (v - mean) / sqrt(var + 1e-5) * gamma + beta, population variance.
std::vector<double> layer_norm(std::span<const double> v, std::span<const double> gamma,
                               std::span<const double> beta);

// Exact triple-loop product; throws on inner-dimension mismatch.
RealMatrix gemm_oracle(const RealMatrix& a, const RealMatrix& b);

// ---------------------------------------------------------------------------
// Layer stacks: SSM layers interleaved with dense/norm layers.

struct SsmLayerDesc {
    SsmLayerParams params;
    SsmVariant variant = SsmVariant::S4;
};

struct DenseLayerDesc {
    RealMatrix weights;                 // in_width x out_width
    std::optional<Activation> act;
};

struct NormLayerDesc {
    std::vector<double> gamma;
    std::vector<double> beta;
};

using LayerDesc = std::variant<SsmLayerDesc, DenseLayerDesc, NormLayerDesc>;

struct LayerStackSpec {
    std::vector<LayerDesc> layers;
};

// Width produced by a layer given its input width; throws if they do not
// compose.
int64_t layer_out_width(const LayerDesc& layer, int64_t in_width);

// Applies the stack to a scalar sequence (T x 1); empty stack is identity.
RealMatrix run_model(const LayerStackSpec& spec, std::span<const double> u);

}  // namespace epochsim
