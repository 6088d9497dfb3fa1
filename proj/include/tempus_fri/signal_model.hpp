///
/// \file signal_model.hpp
///
/// Periodic finite-rate-of-innovation signals, their pulse spectra, the
/// alias-cancelling sampling kernel and the filtered signal, which is a
/// trigonometric polynomial held purely by its Fourier coefficients.
///
/// Coefficient storage convention used throughout the library: harmonic
/// `m` in `[-M, M]` lives at index `m + M`.
///
#ifndef TEMPUS_FRI_SIGNAL_MODEL_HPP
#define TEMPUS_FRI_SIGNAL_MODEL_HPP

#include <algorithm>
#include <cassert>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include <tempus_fri/error.hpp>

namespace tempus_fri
{

using Complex       = std::complex<double>;
using ComplexVector = Eigen::VectorXcd;
using RealVector    = Eigen::VectorXd;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Number of grid points used to approximate the sup-norm of a filtered signal.
inline constexpr int sup_norm_grid_points = 16384;

//------------------------------------------------------------------------------
// Pulse descriptor
//------------------------------------------------------------------------------

/// Unit impulse; its spectrum is identically one.
struct DiracPulse
{
};

/// Centred B-spline of the given degree, compressed in time: t -> beta^n(a t).
struct BSplinePulse
{
    int degree        = 3;
    double time_scale = 1.0;
};

/// Spectrum samples phi_hat(m * omega0) for a set of harmonics.
struct TabulatedPulse
{
    double omega0 = two_pi;
    std::map<int, Complex> values;
};

///
/// Prototype pulse shape of an FRI signal, described through its Fourier
/// transform.
///
class PulseDescriptor
{
public:
    using Kind = std::variant<DiracPulse, BSplinePulse, TabulatedPulse>;

    PulseDescriptor() = default;

    static PulseDescriptor dirac()
    {
        return PulseDescriptor(DiracPulse{});
    }

    static PulseDescriptor bspline(int degree, double time_scale)
    {
        if (degree < 0)
            throw ArgumentError("B-spline degree must be nonnegative");
        if (!(time_scale > 0.0) || !std::isfinite(time_scale))
            throw ArgumentError("B-spline time scale must be positive");
        return PulseDescriptor(BSplinePulse{degree, time_scale});
    }

    /// Conjugate symmetry phi_hat(-m w0) = conj(phi_hat(m w0)) is checked for
    /// every pair present in the table.
    static PulseDescriptor tabulated(double omega0, std::map<int, Complex> values)
    {
        if (!(omega0 > 0.0))
            throw ArgumentError("tabulated spectrum needs a positive omega0");
        for (const auto& [m, v] : values)
        {
            auto it = values.find(-m);
            if (it == values.end())
                continue;
            const double scale = std::max(1.0, std::abs(v));
            if (std::abs(it->second - std::conj(v)) > 1e-12 * scale)
                throw ArgumentError("tabulated spectrum is not conjugate symmetric at m = " +
                                    std::to_string(m));
        }
        return PulseDescriptor(TabulatedPulse{omega0, std::move(values)});
    }

    const Kind& kind() const noexcept
    {
        return m_kind;
    }

    bool is_dirac() const noexcept
    {
        return std::holds_alternative<DiracPulse>(m_kind);
    }

    std::string name() const
    {
        if (std::holds_alternative<DiracPulse>(m_kind))
            return "dirac";
        if (std::holds_alternative<BSplinePulse>(m_kind))
            return "bspline";
        return "tabulated";
    }

private:
    explicit PulseDescriptor(Kind kind) : m_kind(std::move(kind)) {}

    Kind m_kind = DiracPulse{};
};

namespace detail
{

// sin(x)/x with a Taylor fallback near the removable singularity.
inline double sinc(double x)
{
    if (std::abs(x) < 1e-6)
        return 1.0 - x * x / 6.0;
    return std::sin(x) / x;
}

} // namespace detail

///
/// Fourier transform of the pulse evaluated at angular frequency `omega`.
///
/// For `BSplinePulse{n, a}` this is `(1/a) * sinc(omega / (2a))^(n+1)`.
///
inline Complex pulse_spectrum(const PulseDescriptor& pulse, double omega)
{
    if (!std::isfinite(omega))
        throw ArgumentError("pulse spectrum requested at a non-finite frequency");

    return std::visit(
        [omega](const auto& p) -> Complex {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, DiracPulse>)
            {
                return 1.0;
            }
            else if constexpr (std::is_same_v<P, BSplinePulse>)
            {
                const double s = detail::sinc(omega / (2.0 * p.time_scale));
                return std::pow(s, p.degree + 1) / p.time_scale;
            }
            else
            {
                const double ratio = omega / p.omega0;
                const double m     = std::round(ratio);
                if (std::abs(ratio - m) > 1e-9 * std::max(1.0, std::abs(ratio)))
                    throw SpectrumCoverageError("tabulated spectrum is only defined on the harmonic grid");
                auto it = p.values.find(static_cast<int>(m));
                if (it == p.values.end())
                    throw SpectrumCoverageError("tabulated spectrum does not cover m = " +
                                                std::to_string(static_cast<int>(m)));
                return it->second;
            }
        },
        pulse.kind());
}

//------------------------------------------------------------------------------
// FRI signal
//------------------------------------------------------------------------------

///
/// T-periodic stream of K shifted and scaled copies of a pulse.
///
class FriSignal
{
public:
    FriSignal(double period, PulseDescriptor pulse, std::vector<double> amplitudes,
              std::vector<double> shifts)
        : m_period(period),
          m_pulse(std::move(pulse)),
          m_amplitudes(std::move(amplitudes)),
          m_shifts(std::move(shifts))
    {
        if (!(m_period > 0.0) || !std::isfinite(m_period))
            throw ArgumentError("signal period must be positive");
        if (m_amplitudes.empty() || m_amplitudes.size() != m_shifts.size())
            throw ArgumentError("amplitudes and shifts must have equal nonzero length");
        for (double tau : m_shifts)
            if (!(tau >= 0.0 && tau < m_period))
                throw ArgumentError("shift " + std::to_string(tau) + " outside [0, T)");
        for (std::size_t i = 0; i < m_shifts.size(); ++i)
            for (std::size_t j = i + 1; j < m_shifts.size(); ++j)
                if (m_shifts[i] == m_shifts[j])
                    throw ArgumentError("shifts must be pairwise distinct");
    }

    double period() const noexcept
    {
        return m_period;
    }
    double omega0() const noexcept
    {
        return two_pi / m_period;
    }
    const PulseDescriptor& pulse() const noexcept
    {
        return m_pulse;
    }
    const std::vector<double>& amplitudes() const noexcept
    {
        return m_amplitudes;
    }
    const std::vector<double>& shifts() const noexcept
    {
        return m_shifts;
    }
    int K() const noexcept
    {
        return static_cast<int>(m_shifts.size());
    }

private:
    double m_period;
    PulseDescriptor m_pulse;
    std::vector<double> m_amplitudes;
    std::vector<double> m_shifts;
};

//------------------------------------------------------------------------------
// Fourier vector
//------------------------------------------------------------------------------

///
/// Contiguous Fourier coefficients `x_hat[m]`, `m = -M..M`, of a T-periodic
/// function.
///
class FourierVector
{
public:
    FourierVector(int M, ComplexVector coeffs, double period)
        : m_M(M), m_coeffs(std::move(coeffs)), m_period(period)
    {
        if (M < 0)
            throw ArgumentError("highest harmonic M must be nonnegative");
        if (m_coeffs.size() != 2 * M + 1)
            throw ArgumentError("Fourier vector needs 2M+1 coefficients");
        if (!(period > 0.0))
            throw ArgumentError("period must be positive");
    }

    /// All-zero vector.
    static FourierVector zero(int M, double period)
    {
        return FourierVector(M, ComplexVector::Zero(2 * M + 1), period);
    }

    int M() const noexcept
    {
        return m_M;
    }
    int size() const noexcept
    {
        return 2 * m_M + 1;
    }
    double period() const noexcept
    {
        return m_period;
    }
    double omega0() const noexcept
    {
        return two_pi / m_period;
    }
    const ComplexVector& coeffs() const noexcept
    {
        return m_coeffs;
    }

    /// Coefficient of harmonic m, |m| <= M.
    Complex at(int m) const
    {
        assert(m >= -m_M && m <= m_M);
        return m_coeffs[m + m_M];
    }

    /// Largest deviation from x_hat[-m] = conj(x_hat[m]).
    double conjugate_asymmetry() const
    {
        double worst = 0.0;
        for (int m = 0; m <= m_M; ++m)
            worst = std::max(worst, std::abs(at(-m) - std::conj(at(m))));
        return worst;
    }

private:
    int m_M;
    ComplexVector m_coeffs;
    double m_period;
};

//------------------------------------------------------------------------------
// Sampling kernel
//------------------------------------------------------------------------------

///
/// Alias-cancelling kernel described by its nonzero spectral gains on the
/// harmonics |m| <= M; the kernel spectrum vanishes on every other harmonic.
///
class SamplingKernel
{
public:
    /// Unit gains (sum-of-sincs / Dirichlet kernel).
    SamplingKernel(int M, double period)
        : SamplingKernel(M, period, ComplexVector::Ones(2 * M + 1))
    {
    }

    SamplingKernel(int M, double period, ComplexVector gains)
        : m_M(M), m_period(period), m_gains(std::move(gains))
    {
        if (M < 0)
            throw ArgumentError("kernel M must be nonnegative");
        if (!(period > 0.0))
            throw ArgumentError("kernel period must be positive");
        if (m_gains.size() != 2 * M + 1)
            throw ArgumentError("kernel needs 2M+1 gains");
        for (Eigen::Index i = 0; i < m_gains.size(); ++i)
            if (m_gains[i] == Complex(0.0))
                throw ArgumentError("kernel gain vanishes at m = " +
                                    std::to_string(static_cast<int>(i) - M));
    }

    /// Kernel with the same gain g on every retained harmonic.
    static SamplingKernel uniform(int M, double period, double gain)
    {
        return SamplingKernel(M, period, ComplexVector::Constant(2 * M + 1, gain));
    }

    int M() const noexcept
    {
        return m_M;
    }
    double period() const noexcept
    {
        return m_period;
    }
    const ComplexVector& gains() const noexcept
    {
        return m_gains;
    }
    Complex gain(int m) const
    {
        return m_gains[m + m_M];
    }

private:
    int m_M;
    double m_period;
    ComplexVector m_gains;
};

//------------------------------------------------------------------------------
// Operations
//------------------------------------------------------------------------------

///
/// Analytic Fourier coefficients
/// `x_hat[m] = (1/T) phi_hat(m w0) sum_k c_k exp(-j w0 m tau_k)`.
///
inline FourierVector fourier_coefficients(const FriSignal& signal, int M)
{
    if (M < 0)
        throw ArgumentError("M must be nonnegative");
    const double T  = signal.period();
    const double w0 = signal.omega0();
    ComplexVector c(2 * M + 1);
    for (int m = -M; m <= M; ++m)
    {
        Complex swce = 0.0;
        for (int k = 0; k < signal.K(); ++k)
            swce += signal.amplitudes()[k] * std::polar(1.0, -w0 * m * signal.shifts()[k]);
        c[m + M] = pulse_spectrum(signal.pulse(), m * w0) * swce / T;
    }
    return FourierVector(M, std::move(c), T);
}

/// Coefficients of y = x * g, i.e. `x_hat[m] g_m` for |m| <= M.
inline FourierVector filtered_signal(const FriSignal& signal, const SamplingKernel& kernel)
{
    if (std::abs(kernel.period() - signal.period()) > 1e-14 * signal.period())
        throw ConfigurationError("kernel period does not match signal period");
    FourierVector x = fourier_coefficients(signal, kernel.M());
    return FourierVector(kernel.M(), x.coeffs().cwiseProduct(kernel.gains()), signal.period());
}

/// Complex value of sum_m x_hat[m] exp(j w0 m t).
inline Complex eval_trig_complex(const FourierVector& y, double t)
{
    const double w0 = y.omega0();
    Complex acc     = 0.0;
    for (int m = -y.M(); m <= y.M(); ++m)
        acc += y.at(m) * std::polar(1.0, w0 * m * t);
    return acc;
}

/// Real part of the trigonometric polynomial at time t.
inline double eval_trig(const FourierVector& y, double t)
{
    const Complex v = eval_trig_complex(y, t);
#ifndef NDEBUG
    if (y.conjugate_asymmetry() < 1e-12 * std::max(1.0, y.coeffs().norm()))
        assert(std::abs(v.imag()) < 1e-10 * std::max(1.0, std::abs(v.real())));
#endif
    return v.real();
}

///
/// Exact integral of eval_trig over [a, b]:
/// `sum_{m != 0} x_hat[m] (e^{j w0 m b} - e^{j w0 m a}) / (j w0 m) + x_hat[0] (b - a)`.
///
inline double integral_trig(const FourierVector& y, double a, double b)
{
    if (a > b)
        throw ArgumentError("integral_trig requires a <= b");
    const double w0 = y.omega0();
    Complex acc     = y.at(0) * (b - a);
    for (int m = 1; m <= y.M(); ++m)
    {
        const Complex jw(0.0, w0 * m);
        acc += y.at(m) * (std::polar(1.0, w0 * m * b) - std::polar(1.0, w0 * m * a)) / jw;
        acc += y.at(-m) * (std::polar(1.0, -w0 * m * b) - std::polar(1.0, -w0 * m * a)) / (-jw);
    }
    return acc.real();
}

/// Max of |y(t)| over a uniform grid of one period.
inline double sup_norm(const FourierVector& y, int grid_points = sup_norm_grid_points)
{
    const double dt = y.period() / grid_points;
    double best     = 0.0;
    for (int i = 0; i < grid_points; ++i)
        best = std::max(best, std::abs(eval_trig_complex(y, i * dt).real()));
    return best;
}

} // namespace tempus_fri

#endif // TEMPUS_FRI_SIGNAL_MODEL_HPP
