#include "epochsim/golden.hpp"

#include <cmath>
#include <stdexcept>

namespace epochsim {

void validate_params(const SsmLayerParams& p) {
    if (p.n < 1) throw std::invalid_argument("ssm params: N must be >= 1");
    if (p.h < 1) throw std::invalid_argument("ssm params: H must be >= 1");
    if (!(p.dt > 0.0)) throw std::invalid_argument("ssm params: dt must be > 0");
    if (p.lambda.size() != static_cast<size_t>(p.n) || p.b.size() != static_cast<size_t>(p.n))
        throw std::invalid_argument("ssm params: lambda/B must have length N");
    if (p.c.size() != static_cast<size_t>(p.h) * static_cast<size_t>(p.n))
        throw std::invalid_argument("ssm params: C must be H x N");
    if (p.d && p.d->size() != static_cast<size_t>(p.h))
        throw std::invalid_argument("ssm params: D must have one entry per head");
    for (const Complex& l : p.lambda)
        if (!(l.real() > 0.0))
            throw std::invalid_argument("ssm params: Re(lambda) must be > 0 for every mode");
}

DiscreteCoeffs discretize(const SsmLayerParams& p) {
    validate_params(p);
    DiscreteCoeffs out;
    out.abar.reserve(p.lambda.size());
    out.bbar.reserve(p.lambda.size());
    for (size_t i = 0; i < p.lambda.size(); ++i) {
        const Complex l = p.lambda[i];
        if (l == Complex{0.0, 0.0})
            throw std::domain_error("discretize: lambda_i must be nonzero");
        const Complex a = std::exp(-l * p.dt);
        out.abar.push_back(a);
        out.bbar.push_back((Complex{1.0, 0.0} - a) * p.b[i] / l);
    }
    return out;
}

StateVector s4_step(const StateVector& x, double u, const DiscreteCoeffs& c) {
    StateVector next(x.size());
    for (size_t i = 0; i < x.size(); ++i)
        next[i] = c.abar[i] * x[i] + c.bbar[i] * u;
    return next;
}

StateVector liquid_step(const StateVector& x, double u, const DiscreteCoeffs& c) {
    StateVector next(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        const Complex scaled = c.bbar[i] * u;
        next[i] = (c.abar[i] + scaled) * x[i] + scaled;
    }
    return next;
}

std::vector<double> linear_out(const StateVector& x, double u, const SsmLayerParams& p) {
    std::vector<double> y(static_cast<size_t>(p.h), 0.0);
    for (int head = 0; head < p.h; ++head) {
        Complex acc{0.0, 0.0};
        for (int j = 0; j < p.n; ++j)
            acc += p.c[static_cast<size_t>(head) * p.n + j] * x[static_cast<size_t>(j)];
        double v = acc.real();
        if (p.d) v += (*p.d)[static_cast<size_t>(head)] * u;
        y[static_cast<size_t>(head)] = v;
    }
    return y;
}

RealMatrix run_layer(const SsmLayerParams& p, std::span<const double> u, SsmVariant variant) {
    const DiscreteCoeffs c = discretize(p);
    RealMatrix out(static_cast<int64_t>(u.size()), p.h);
    StateVector x(static_cast<size_t>(p.n), Complex{0.0, 0.0});
    for (size_t t = 0; t < u.size(); ++t) {
        x = (variant == SsmVariant::S4) ? s4_step(x, u[t], c) : liquid_step(x, u[t], c);
        const std::vector<double> y = linear_out(x, u[t], p);
        for (int head = 0; head < p.h; ++head)
            out.at(static_cast<int64_t>(t), head) = y[static_cast<size_t>(head)];
    }
    return out;
}

double activation_scalar(double x, Activation f) {
    switch (f) {
        case Activation::Relu: return x > 0.0 ? x : 0.0;
        case Activation::Silu: return x / (1.0 + std::exp(-x));
        case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
        case Activation::Tanh: return std::tanh(x);
    }
    return x;
}

std::vector<double> apply_activation(std::span<const double> v, Activation f) {
    std::vector<double> out(v.size());
    for (size_t i = 0; i < v.size(); ++i) out[i] = activation_scalar(v[i], f);
    return out;
}

std::vector<double> layer_norm(std::span<const double> v, std::span<const double> gamma,
                               std::span<const double> beta) {
    if (v.empty()) throw std::invalid_argument("layer_norm: empty vector");
    if (gamma.size() != v.size() || beta.size() != v.size())
        throw std::invalid_argument("layer_norm: gamma/beta size mismatch");
    constexpr double kEps = 1e-5;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size());
    const double inv = 1.0 / std::sqrt(var + kEps);
    std::vector<double> out(v.size());
    for (size_t i = 0; i < v.size(); ++i)
        out[i] = (v[i] - mean) * inv * gamma[i] + beta[i];
    return out;
}

RealMatrix gemm_oracle(const RealMatrix& a, const RealMatrix& b) {
    if (a.cols != b.rows)
        throw std::invalid_argument("gemm_oracle: inner dimensions do not match");
    RealMatrix c(a.rows, b.cols);
    for (int64_t i = 0; i < a.rows; ++i)
        for (int64_t j = 0; j < b.cols; ++j) {
            double acc = 0.0;
            for (int64_t k = 0; k < a.cols; ++k)
                acc += a.at(i, k) * b.at(k, j);
            c.at(i, j) = acc;
        }
    return c;
}

int64_t layer_out_width(const LayerDesc& layer, int64_t in_width) {
    if (const auto* ssm = std::get_if<SsmLayerDesc>(&layer)) {
        if (in_width != 1)
            throw std::invalid_argument("layer stack: SSM layer needs width-1 input");
        return ssm->params.h;
    }
    if (const auto* dense = std::get_if<DenseLayerDesc>(&layer)) {
        if (in_width != dense->weights.rows)
            throw std::invalid_argument("layer stack: dense input width mismatch");
        return dense->weights.cols;
    }
    const auto& norm = std::get<NormLayerDesc>(layer);
    if (static_cast<int64_t>(norm.gamma.size()) != in_width ||
        static_cast<int64_t>(norm.beta.size()) != in_width)
        throw std::invalid_argument("layer stack: norm width mismatch");
    return in_width;
}

RealMatrix run_model(const LayerStackSpec& spec, std::span<const double> u) {
    RealMatrix cur(static_cast<int64_t>(u.size()), 1);
    for (size_t t = 0; t < u.size(); ++t) cur.at(static_cast<int64_t>(t), 0) = u[t];

    for (const LayerDesc& layer : spec.layers) {
        const int64_t out_width = layer_out_width(layer, cur.cols);
        if (const auto* ssm = std::get_if<SsmLayerDesc>(&layer)) {
            cur = run_layer(ssm->params, std::span<const double>(cur.data), ssm->variant);
        } else if (const auto* dense = std::get_if<DenseLayerDesc>(&layer)) {
            RealMatrix next = gemm_oracle(cur, dense->weights);
            if (dense->act)
                next.data = apply_activation(std::span<const double>(next.data), *dense->act);
            cur = std::move(next);
        } else {
            const auto& norm = std::get<NormLayerDesc>(layer);
            RealMatrix next(cur.rows, out_width);
            for (int64_t t = 0; t < cur.rows; ++t) {
                std::span<const double> row(cur.data.data() + t * cur.cols,
                                            static_cast<size_t>(cur.cols));
                const std::vector<double> nr = layer_norm(row, norm.gamma, norm.beta);
                for (int64_t j = 0; j < out_width; ++j) next.at(t, j) = nr[static_cast<size_t>(j)];
            }
            cur = std::move(next);
        }
    }
    return cur;
}

}  // namespace epochsim
