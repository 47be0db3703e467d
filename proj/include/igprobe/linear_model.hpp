#pragma once
// Closed-form linear softmax classifier used as a cross-implementation oracle:
// logits_j = sum_i W[j][i] x_i + b_j with W and b generated from fixed formulas,
// loss = cross-entropy at label k, grad_i = sum_j (p_j - [j == k]) W[j][i].

#include <cmath>

#include "igprobe/model.hpp"

namespace igprobe {

class AnalyticLinearModel {
public:
    AnalyticLinearModel(Shape input_shape, std::size_t classes)
        : shape_(std::move(input_shape)), classes_(classes), n_(shape_numel(shape_)) {
        if (classes_ < 2) throw Error("linear model needs >= 2 classes");
    }

    double weight(std::size_t j, std::size_t i) const {
        return 0.5 * std::sin(0.37 * static_cast<double>(i + 1) * static_cast<double>(j + 1)) /
               std::sqrt(static_cast<double>(n_) / 64.0);
    }
    double bias(std::size_t j) const { return 0.1 * std::cos(1.3 * static_cast<double>(j + 1)); }

    const Shape& input_shape() const { return shape_; }
    std::size_t num_classes() const { return classes_; }

    Tensor logits(const Tensor& x) const {
        if (x.shape() != shape_)
            throw DimensionError("linear model expects " + shape_str(shape_) + ", got " + shape_str(x.shape()));
        Tensor z({classes_});
        for (std::size_t j = 0; j < classes_; ++j) {
            double s = bias(j);
            for (std::size_t i = 0; i < n_; ++i) s += weight(j, i) * x[i];
            z[j] = s;
        }
        return z;
    }

    LossGrad evaluate(const Tensor& x, std::size_t k) const {
        LossGrad out;
        out.logits = logits(x);
        out.loss = loss_ce(out.logits, k);
        const Tensor p = softmax(out.logits);
        out.grad = Tensor(shape_);
        for (std::size_t j = 0; j < classes_; ++j) {
            const double r = p[j] - (j == k ? 1.0 : 0.0);
            for (std::size_t i = 0; i < n_; ++i) out.grad[i] += r * weight(j, i);
        }
        return out;
    }

private:
    Shape shape_;
    std::size_t classes_;
    std::size_t n_;
};

}  // namespace igprobe
