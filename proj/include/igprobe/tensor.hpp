#pragma once
// Dense row-major float64 tensors and a seeded normal generator.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace igprobe {

/// Base class for domain errors raised by the library. The CLI maps these
/// to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
    if (s.empty()) throw DimensionError("rank zero unsupported");
    std::size_t n = 1;
    for (auto d : s) {
        if (d == 0) throw DimensionError("shape " + shape_str(s) + " has a zero extent");
        n *= d;
    }
    return n;
}

/// Row-major n-dimensional array of doubles.
///
/// Invariants: numel(shape) == data.size() and every element is finite.
/// Constructors enforce both; mutation through data() is allowed while a
/// tensor is being built and is expected to keep values finite.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape, double value = 0.0)
        : shape_(std::move(shape)), data_(shape_numel(shape_), value) {
        if (!std::isfinite(value)) throw Error("non-finite fill value");
    }

    Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (shape_numel(shape_) != data_.size())
            throw DimensionError("shape " + shape_str(shape_) + " needs " +
                                 std::to_string(shape_numel(shape_)) + " values, got " +
                                 std::to_string(data_.size()));
        for (double v : data_)
            if (!std::isfinite(v)) throw Error("non-finite value in tensor data");
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }
    const std::vector<double>& vec() const noexcept { return data_; }

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
    double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }

    Tensor reshaped(Shape s) const { return Tensor(std::move(s), data_); }

    bool operator==(const Tensor&) const = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

inline Tensor tensor_filled(const Shape& shape, double value) { return Tensor(shape, value); }

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
}

/// Plain triple-loop product (i, k, j order), accumulating in doubles.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0])
        throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    Tensor c({m, n});
    auto A = a.data();
    auto B = b.data();
    auto C = c.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = A[i * k + p];
            for (std::size_t j = 0; j < n; ++j) C[i * n + j] += aip * B[p * n + j];
        }
    return c;
}

/// Index of the maximum; ties go to the lowest index.
inline std::size_t argmax(std::span<const double> t) {
    if (t.empty()) throw DimensionError("argmax of empty tensor");
    std::size_t best = 0;
    for (std::size_t i = 1; i < t.size(); ++i)
        if (t[i] > t[best]) best = i;
    return best;
}

inline std::size_t argmax(const Tensor& t) {
    if (t.rank() != 1) throw DimensionError("argmax expects rank-1, got " + shape_str(t.shape()));
    return argmax(t.data());
}

/// Seeded generator: std::mt19937_64 for the bit stream (fully specified by the
/// standard, so identical on every platform) plus Box-Muller for normals.
/// Single owner; split seeds rather than sharing across threads.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Rejection keeps the draw unbiased and portable.
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t v;
        do v = engine_();
        while (v >= limit);
        return v % n;
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] so the log is finite.
        const double u1 = static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

inline Tensor rng_normal(SeededRng& rng, const Shape& shape) {
    Tensor t(shape);
    for (double& v : t.data()) v = rng.normal();
    return t;
}

inline Tensor rng_uniform(SeededRng& rng, const Shape& shape, double lo = 0.0, double hi = 1.0) {
    Tensor t(shape);
    for (double& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

inline double sum(const Tensor& t) {
    double s = 0.0;
    for (double v : t.data()) s += v;
    return s;
}

inline double max_abs(const Tensor& t) {
    double m = 0.0;
    for (double v : t.data()) m = std::max(m, std::abs(v));
    return m;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace igprobe
