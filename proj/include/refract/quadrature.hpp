#pragma once

// Adaptive Gauss-Kronrod (G10/K21) integration with global subdivision.
// Works for real- and complex-valued integrands.

#include "refract/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

namespace refract::quad {

struct Tolerance {
    double abs = 1e-12;
    double rel = 1e-10;
    int max_intervals = 4000;
};

namespace detail {

inline constexpr std::array<double, 11> kronrod_nodes = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.0};

inline constexpr std::array<double, 11> kronrod_weights = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077208564345581, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};

// Gauss weights for the odd-indexed Kronrod nodes.
inline constexpr std::array<double, 5> gauss_weights = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338};

template <class T>
struct Segment {
    double a;
    double b;
    T value;
    double error;
};

template <class T>
double magnitude(const T& v) {
    return std::abs(v);
}

template <class T, class F>
Segment<T> kronrod21(F& f, double a, double b) {
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    T center = f(mid);
    T kronrod = center * kronrod_weights[10];
    T gauss = T{};
    for (int i = 0; i < 10; ++i) {
        const double dx = half * kronrod_nodes[i];
        const T sum = f(mid - dx) + f(mid + dx);
        kronrod += sum * kronrod_weights[i];
        if (i % 2 == 1) gauss += sum * gauss_weights[i / 2];
    }
    kronrod *= half;
    gauss *= half;
    return {a, b, kronrod, magnitude(kronrod - gauss)};
}

template <class T>
bool is_finite_value(const T& v) {
    if constexpr (std::is_floating_point_v<T>) {
        return std::isfinite(v);
    } else {
        return std::isfinite(v.real()) && std::isfinite(v.imag());
    }
}

} // namespace detail

/// Integrates f over [a, b]; throws QuadratureFailure when the error target
/// max(abs, rel * |I|) cannot be met within tol.max_intervals subdivisions.
template <class F>
auto integrate(F&& f, double a, double b, Tolerance tol = {}) {
    using T = std::decay_t<decltype(f(a))>;
    if (a == b) return T{};
    if (b < a) return T(-integrate(f, b, a, tol));

    using Seg = detail::Segment<T>;
    auto worse = [](const Seg& l, const Seg& r) { return l.error < r.error; };
    std::vector<Seg> heap;
    heap.push_back(detail::kronrod21<T>(f, a, b));
    T total = heap.front().value;
    double error = heap.front().error;
    double frozen_error = 0.0;  // error of segments too narrow to split
    T frozen_value{};

    int iterations = 0;
    while (error + frozen_error > std::max(tol.abs, tol.rel * detail::magnitude(total + frozen_value))) {
        if (heap.empty()) break;
        if (static_cast<int>(heap.size()) >= tol.max_intervals) {
            fail(ErrorCode::QuadratureFailure,
                 "adaptive quadrature did not converge on [" + std::to_string(a) + ", " +
                     std::to_string(b) + "], error estimate " + std::to_string(error + frozen_error));
        }
        std::pop_heap(heap.begin(), heap.end(), worse);
        Seg worst = heap.back();
        heap.pop_back();
        total -= worst.value;
        error -= worst.error;
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b) ||
            (worst.b - worst.a) < 64 * std::numeric_limits<double>::epsilon() *
                                      std::max(std::abs(worst.a), std::abs(worst.b))) {
            frozen_error += worst.error;
            frozen_value += worst.value;
        } else {
            Seg left = detail::kronrod21<T>(f, worst.a, mid);
            Seg right = detail::kronrod21<T>(f, mid, worst.b);
            total += left.value + right.value;
            error += left.error + right.error;
            heap.push_back(left);
            std::push_heap(heap.begin(), heap.end(), worse);
            heap.push_back(right);
            std::push_heap(heap.begin(), heap.end(), worse);
        }
        // Resum now and then so cancellation in the running totals cannot build up.
        if (++iterations % 32 == 0) {
            total = T{};
            error = 0.0;
            for (const auto& s : heap) {
                total += s.value;
                error += s.error;
            }
        }
        error = std::max(error, 0.0);
    }
    total = T{};
    error = 0.0;
    for (const auto& s : heap) {
        total += s.value;
        error += s.error;
    }
    T result = total + frozen_value;
    if (!detail::is_finite_value(result)) {
        fail(ErrorCode::QuadratureFailure, "non-finite integrand value encountered");
    }
    if (error + frozen_error > 1e3 * std::max(tol.abs, tol.rel * detail::magnitude(result))) {
        fail(ErrorCode::QuadratureFailure,
             "quadrature stalled at error " + std::to_string(error + frozen_error));
    }
    return result;
}

/// Integrates f over [a, infinity) through x = a + scale * t / (1 - t).
template <class F>
auto integrate_to_infinity(F&& f, double a, double scale = 1.0, Tolerance tol = {}) {
    using T = std::decay_t<decltype(f(a))>;
    auto mapped = [&](double t) -> T {
        const double one_minus = 1.0 - t;
        const double x = a + scale * t / one_minus;
        if (!std::isfinite(x)) return T{};
        return f(x) * (scale / (one_minus * one_minus));
    };
    return integrate(mapped, 0.0, 1.0, tol);
}

/// Sums integrate() over consecutive pieces [p_i, p_{i+1}] of a sorted breakpoint list.
template <class F>
auto integrate_pieces(F&& f, std::span<const double> points, Tolerance tol = {}) {
    using T = std::decay_t<decltype(f(points[0]))>;
    T sum{};
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
        if (points[i + 1] > points[i]) sum += integrate(f, points[i], points[i + 1], tol);
    }
    return sum;
}

} // namespace refract::quad
