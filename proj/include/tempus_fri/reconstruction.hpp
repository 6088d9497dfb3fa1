///
/// \file reconstruction.hpp
///
/// Forward systems relating time-encoded measurements to Fourier
/// coefficients, Prony's annihilating-filter method, amplitude regression and
/// the GenFRI-TEM alternating minimization for jittered measurements.
///
#ifndef TEMPUS_FRI_RECONSTRUCTION_HPP
#define TEMPUS_FRI_RECONSTRUCTION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include <tempus_fri/error.hpp>
#include <tempus_fri/numerics.hpp>
#include <tempus_fri/signal_model.hpp>
#include <tempus_fri/tem_encoders.hpp>

namespace tempus_fri
{

//------------------------------------------------------------------------------
// Forward systems
//------------------------------------------------------------------------------

enum class Provenance
{
    Ctem,
    Iftem,
    MultichannelStack
};

///
/// Linear measurement model `y = G x_hat` with `2M+1` unknown Fourier
/// coefficients of the filtered signal.
///
struct ForwardSystem
{
    ComplexMatrix matrix;
    RealVector measurements;
    int M              = 0;
    double period      = 1.0;
    Provenance provenance = Provenance::Ctem;
    /// Pairs of (numerically) identical rows found while stacking channels.
    std::vector<std::pair<Eigen::Index, Eigen::Index>> duplicate_rows;

    Eigen::Index rows() const
    {
        return matrix.rows();
    }
    Eigen::Index cols() const
    {
        return matrix.cols();
    }
};

/// Rows `[e^{-j M w0 t_n}, ..., 1, ..., e^{j M w0 t_n}]`.
inline ComplexMatrix build_gct(const TriggerSet& times, int M)
{
    if (times.size() == 0)
        throw ArgumentError("build_gct needs at least one trigger time");
    const double w0 = two_pi / times.period();
    const auto L    = static_cast<Eigen::Index>(times.size());
    ComplexMatrix G(L, 2 * M + 1);
    for (Eigen::Index n = 0; n < L; ++n)
        for (int m = -M; m <= M; ++m)
            G(n, m + M) = std::polar(1.0, w0 * m * times.times()[n]);
    return G;
}

///
/// Rows of antiderivatives `e^{j m w0 t} / (j m w0)` for m != 0 and `t` for
/// m = 0, evaluated at every trigger time. First differences of these rows
/// give build_gif.
///
inline ComplexMatrix build_gct_antiderivative(const TriggerSet& times, int M)
{
    const double w0 = two_pi / times.period();
    const auto L    = static_cast<Eigen::Index>(times.size());
    ComplexMatrix G(L, 2 * M + 1);
    for (Eigen::Index n = 0; n < L; ++n)
    {
        const double t = times.times()[n];
        for (int m = -M; m <= M; ++m)
            G(n, m + M) = m == 0 ? Complex(t)
                                 : std::polar(1.0, w0 * m * t) / Complex(0.0, w0 * m);
    }
    return G;
}

///
/// Integrate-and-fire forward matrix of shape `(L-1) x (2M+1)`. Column m != 0
/// holds `(e^{j m w0 t_{n+1}} - e^{j m w0 t_n}) / (j m w0)` and the middle
/// column the gaps `t_{n+1} - t_n`, so `G x_hat` equals the local integrals.
///
inline ComplexMatrix build_gif(const TriggerSet& times, int M)
{
    if (times.size() < 2)
        throw ArgumentError("build_gif needs at least two trigger times");
    const double w0 = two_pi / times.period();
    const auto& t   = times.times();
    const auto rows = static_cast<Eigen::Index>(t.size()) - 1;
    ComplexMatrix G(rows, 2 * M + 1);
    for (Eigen::Index n = 0; n < rows; ++n)
    {
        const double a = t[n], b = t[n + 1];
        for (int m = -M; m <= M; ++m)
        {
            if (m == 0)
            {
                G(n, M) = b - a;
                continue;
            }
            const double wm = w0 * m;
            // e^{j wm b} - e^{j wm a} = 2j sin(wm (b-a)/2) e^{j wm (a+b)/2}
            G(n, m + M) = 2.0 * std::sin(0.5 * wm * (b - a)) / wm *
                          std::polar(1.0, 0.5 * wm * (a + b));
        }
    }
    return G;
}

/// Crossing-machine system from (possibly jittered) trigger times.
inline ForwardSystem make_ctem_system(const TriggerSet& times, const CtemConfig& cfg, int M)
{
    const MeasurementVector meas = ctem_measurements(times, cfg);
    return ForwardSystem{build_gct(times, M),
                         Eigen::Map<const RealVector>(meas.values.data(),
                                                      static_cast<Eigen::Index>(meas.values.size())),
                         M, times.period(), Provenance::Ctem, {}};
}

/// Integrate-and-fire system from (possibly jittered) trigger times.
inline ForwardSystem make_iftem_system(const TriggerSet& times, const IftemConfig& cfg, int M)
{
    const MeasurementVector meas = t_transform(times, cfg);
    return ForwardSystem{build_gif(times, M),
                         Eigen::Map<const RealVector>(meas.values.data(),
                                                      static_cast<Eigen::Index>(meas.values.size())),
                         M, times.period(), Provenance::Iftem, {}};
}

/// Dispatches on the channel kind.
inline ForwardSystem make_system(const TriggerSet& times, const ChannelConfig& cfg, int M)
{
    if (const auto* c = std::get_if<CtemConfig>(&cfg))
        return make_ctem_system(times, *c, M);
    return make_iftem_system(times, std::get<IftemConfig>(cfg), M);
}

///
/// Vertical concatenation of per-channel systems. Numerically identical rows
/// (e.g. from a coincident trigger time) are recorded in `duplicate_rows`.
///
inline ForwardSystem stack_channels(const std::vector<ForwardSystem>& systems)
{
    if (systems.empty())
        throw ArgumentError("stack_channels needs at least one system");
    if (systems.size() == 1)
        return systems.front();

    const int M     = systems.front().M;
    const double T  = systems.front().period;
    Eigen::Index rows = 0;
    for (const auto& s : systems)
    {
        if (s.M != M || std::abs(s.period - T) > 1e-14 * T)
            throw ConfigurationError("stacked systems must share M and the period");
        rows += s.rows();
    }

    ForwardSystem out;
    out.matrix.resize(rows, 2 * M + 1);
    out.measurements.resize(rows);
    out.M          = M;
    out.period     = T;
    out.provenance = Provenance::MultichannelStack;
    Eigen::Index r = 0;
    for (const auto& s : systems)
    {
        out.matrix.middleRows(r, s.rows())       = s.matrix;
        out.measurements.segment(r, s.rows())    = s.measurements;
        r += s.rows();
    }

    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = i + 1; j < rows; ++j)
            if ((out.matrix.row(i) - out.matrix.row(j)).norm() <=
                1e-12 * std::max(1.0, out.matrix.row(i).norm()))
                out.duplicate_rows.emplace_back(i, j);
    return out;
}

///
/// Least-squares solution of the forward system: the Fourier coefficients of
/// the filtered signal.
///
inline FourierVector recover_fourier(const ForwardSystem& system)
{
    if (system.rows() < system.cols())
        throw InsufficientMeasurementsError(static_cast<std::size_t>(system.rows()),
                                            static_cast<std::size_t>(system.cols()));
    const ComplexVector y = system.measurements.cast<Complex>();
    return FourierVector(system.M, lstsq(system.matrix, y), system.period);
}

//------------------------------------------------------------------------------
// Spectral model
//------------------------------------------------------------------------------

///
/// Known spectral factors between the unknowns of a forward system and the
/// sum-of-exponentials sequence `s[m] = sum_k c_k e^{-j w0 m tau_k}`:
/// `y_hat[m] = g_m (1/T) phi_hat(m w0) s[m]`.
///
struct SpectralModel
{
    PulseDescriptor pulse = PulseDescriptor::dirac();
    ComplexVector gains; ///< kernel gains g_m; empty means all ones

    ComplexVector weights(int M, double T) const
    {
        if (gains.size() != 0 && gains.size() != 2 * M + 1)
            throw ConfigurationError("kernel gains do not match M");
        ComplexVector w(2 * M + 1);
        for (int m = -M; m <= M; ++m)
        {
            const Complex g = gains.size() == 0 ? Complex(1.0) : gains[m + M];
            w[m + M]        = g * pulse_spectrum(pulse, two_pi * m / T) / T;
        }
        return w;
    }
};

/// Divides kernel gains out of filtered coefficients.
inline FourierVector unfilter(const FourierVector& y, const ComplexVector& gains)
{
    if (gains.size() == 0)
        return y;
    if (gains.size() != y.size())
        throw ConfigurationError("kernel gains do not match M");
    return FourierVector(y.M(), y.coeffs().cwiseQuotient(gains), y.period());
}

///
/// Sum-of-exponentials part `T x_hat[m] / phi_hat(m w0)` of signal
/// coefficients. Harmonics where the pulse spectrum is below `1e-12` of its
/// maximum are dropped by truncating to the largest symmetric range that
/// avoids them.
///
inline FourierVector divide_pulse(const FourierVector& xhat, const PulseDescriptor& pulse)
{
    const int M     = xhat.M();
    const double T  = xhat.period();
    ComplexVector phi(2 * M + 1);
    for (int m = -M; m <= M; ++m)
        phi[m + M] = pulse_spectrum(pulse, two_pi * m / T);
    const double pmax = phi.cwiseAbs().maxCoeff();
    int keep          = -1;
    for (int m = 0; m <= M; ++m)
    {
        if (std::abs(phi[M + m]) < 1e-12 * pmax || std::abs(phi[M - m]) < 1e-12 * pmax)
            break;
        keep = m;
    }
    if (keep < 0)
        throw DegeneratePulseError("pulse spectrum vanishes at the zeroth harmonic");
    ComplexVector s(2 * keep + 1);
    for (int m = -keep; m <= keep; ++m)
        s[m + keep] = T * xhat.at(m) / phi[m + M];
    return FourierVector(keep, std::move(s), T);
}

//------------------------------------------------------------------------------
// Prony
//------------------------------------------------------------------------------

/// Length-(K+1) filter whose convolution with the SWCE sequence vanishes.
struct AnnihilatingFilter
{
    ComplexVector coeffs;

    int K() const
    {
        return static_cast<int>(coeffs.size()) - 1;
    }
};

/// Maps filter roots to shifts: project onto the unit circle and take
/// `tau = (-T arg(root) / (2 pi)) mod T`; sorted ascending.
inline std::vector<double> shifts_from_filter(const AnnihilatingFilter& h, double T)
{
    std::vector<double> shifts;
    for (const Complex& r : poly_roots(h.coeffs))
    {
        double tau = -T * std::arg(r) / two_pi;
        tau        = std::fmod(tau, T);
        if (tau < 0.0)
            tau += T;
        if (tau >= T)
            tau = 0.0;
        shifts.push_back(tau);
    }
    std::sort(shifts.begin(), shifts.end());
    return shifts;
}

struct PronyResult
{
    AnnihilatingFilter filter;
    std::vector<double> shifts;
    double sigma_min    = 0.0;
    double sigma_second = 0.0;
};

///
/// Prony's method on a sum-of-exponentials sequence: the annihilating filter
/// is the right singular vector of the smallest singular value of the
/// order-K Toeplitz embedding.
///
inline PronyResult prony_shifts(const FourierVector& swce, int K)
{
    if (K < 1)
        throw ArgumentError("Prony needs K >= 1");
    if (swce.M() < K)
        throw ArgumentError("Prony needs at least 2K+1 contiguous coefficients");
    const ToeplitzEmbedding T = toeplitzify(swce, K);
    const NullVector nv       = nullspace_min_singular(T.matrix);
    if (!(nv.sigma_max > 0.0) || nv.sigma_second - nv.sigma_min <= 1e-8 * nv.sigma_max)
        throw CoincidentShiftError("annihilating filter is not unique; shifts may coincide");
    PronyResult out{AnnihilatingFilter{nv.vector}, {}, nv.sigma_min, nv.sigma_second};
    out.shifts = shifts_from_filter(out.filter, swce.period());
    return out;
}

/// Least-squares amplitudes; `imaginary_residue` is the largest imaginary
/// part discarded when taking real parts.
struct AmplitudeFit
{
    std::vector<double> amplitudes;
    double imaginary_residue = 0.0;
};

///
/// Regresses `x_hat[m] = (1/T) phi_hat(m w0) sum_k c_k e^{-j w0 m tau_k}` for
/// the amplitudes, skipping harmonics where the pulse spectrum is negligible.
///
inline AmplitudeFit recover_amplitudes(const FourierVector& xhat, const std::vector<double>& shifts,
                                       const PulseDescriptor& pulse)
{
    const int M    = xhat.M();
    const double T = xhat.period();
    const double w0 = two_pi / T;
    std::vector<int> used;
    ComplexVector phi(2 * M + 1);
    for (int m = -M; m <= M; ++m)
        phi[m + M] = pulse_spectrum(pulse, m * w0);
    const double pmax = phi.cwiseAbs().maxCoeff();
    for (int m = -M; m <= M; ++m)
        if (std::abs(phi[m + M]) >= 1e-12 * pmax && pmax > 0.0)
            used.push_back(m);
    if (used.empty())
        throw DegeneratePulseError("pulse spectrum vanishes on every harmonic");

    const auto K = static_cast<Eigen::Index>(shifts.size());
    ComplexMatrix A(static_cast<Eigen::Index>(used.size()), K);
    ComplexVector b(static_cast<Eigen::Index>(used.size()));
    for (std::size_t r = 0; r < used.size(); ++r)
    {
        const int m = used[r];
        for (Eigen::Index k = 0; k < K; ++k)
            A(r, k) = phi[m + M] / T * std::polar(1.0, -w0 * m * shifts[k]);
        b[r] = xhat.at(m);
    }
    const ComplexVector c = lstsq(A, b);
    AmplitudeFit fit;
    for (Eigen::Index k = 0; k < K; ++k)
    {
        fit.amplitudes.push_back(c[k].real());
        fit.imaginary_residue = std::max(fit.imaginary_residue, std::abs(c[k].imag()));
    }
    return fit;
}

//------------------------------------------------------------------------------
// Reconstruction results
//------------------------------------------------------------------------------

struct ReconstructionResult
{
    std::vector<double> shifts;
    std::vector<double> amplitudes;
    FourierVector fourier = FourierVector::zero(0, 1.0); ///< signal coefficients x_hat
    AnnihilatingFilter filter;
    double residual      = 0.0; ///< |G y_hat - y|_2
    int iterations_used  = 0;
    int restarts_used    = 0;
    bool converged       = true;
};

///
/// Non-iterative decoder: least squares for the filtered coefficients, then
/// Prony on the sum-of-exponentials part and amplitude regression.
///
inline ReconstructionResult decode_direct(const ForwardSystem& system, int K,
                                          const SpectralModel& model = {})
{
    const FourierVector yhat = recover_fourier(system);
    const FourierVector xhat = unfilter(yhat, model.gains);
    const PronyResult pr     = prony_shifts(divide_pulse(xhat, model.pulse), K);
    ReconstructionResult res;
    res.shifts     = pr.shifts;
    res.amplitudes = recover_amplitudes(xhat, pr.shifts, model.pulse).amplitudes;
    res.fourier    = xhat;
    res.filter     = pr.filter;
    res.residual   = (system.matrix * yhat.coeffs() - system.measurements.cast<Complex>()).norm();
    return res;
}

//------------------------------------------------------------------------------
// GenFRI-TEM
//------------------------------------------------------------------------------

struct GenFriOptions
{
    /// Stop when |G x - y|^2 <= eta; a negative value selects 1e-12 |y|^2.
    double eta        = -1.0;
    int max_iters     = 50;
    int max_restarts  = 50;
    std::uint64_t seed = 0;
};

///
/// Alternating minimization of `|G x - y|^2` subject to `T_K(x) h = 0` and
/// `<h, h0> = 1`.
///
/// The unknowns are the sum-of-exponentials sequence s with the spectral
/// weights of `model` folded into the columns of G. Each iteration solves
/// the x-step saddle system
///
///     [ A^H A   Z(h)^H ] [ s     ]   [ A^H y ]
///     [ Z(h)    0      ] [ alpha ] = [ 0     ]
///
/// and the h-step system with `beta = (A^H A)^+ A^H y` and `Z` evaluated at
/// the previous filter. Restarts draw a fresh `h0 ~ CN(0, I)`; the lowest
/// residual iterate over all restarts is kept and a run stops at the first
/// restart that reaches eta. Shifts come from the filter roots, amplitudes
/// from least squares on the final coefficients.
///
inline ReconstructionResult genfri_tem(const ForwardSystem& system, int K,
                                       const GenFriOptions& opts = {},
                                       const SpectralModel& model = {})
{
    const int M = system.M;
    const int N = 2 * M + 1;
    if (K < 1 || M < K)
        throw ArgumentError("GenFRI-TEM needs 1 <= K <= M");
    if (system.cols() != N)
        throw ArgumentError("forward matrix does not have 2M+1 columns");
    if (system.rows() < 2 * K + 1)
        throw InsufficientMeasurementsError(static_cast<std::size_t>(system.rows()),
                                            static_cast<std::size_t>(2 * K + 1));
    if (opts.max_iters < 1 || opts.max_restarts < 1)
        throw ArgumentError("GenFRI-TEM needs positive iteration and restart budgets");

    const double T        = system.period;
    const ComplexVector w = model.weights(M, T);
    if (w.cwiseAbs().minCoeff() < 1e-12 * w.cwiseAbs().maxCoeff())
        throw DegeneratePulseError("spectral weights vanish on a retained harmonic");

    const ComplexMatrix A   = system.matrix * w.asDiagonal();
    const ComplexVector y   = system.measurements.cast<Complex>();
    const ComplexMatrix AhA = A.adjoint() * A;
    const ComplexVector Ahy = A.adjoint() * y;
    const double eta        = opts.eta >= 0.0 ? opts.eta : 1e-12 * y.squaredNorm();

    const ComplexVector beta = lstsq(AhA, Ahy);
    const ComplexMatrix Tb   = toeplitzify(FourierVector(M, beta, T), K).matrix;

    const int nx = N + (N - K);
    const int nh = (K + 1) + (N - K) + N + 1;
    ComplexVector rhs_x = ComplexVector::Zero(nx);
    rhs_x.head(N)       = Ahy;
    ComplexVector rhs_h = ComplexVector::Zero(nh);
    rhs_h[nh - 1]       = 1.0;

    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    struct Best
    {
        ComplexVector s;
        ComplexVector h;
        double residual = std::numeric_limits<double>::infinity();
        int iterations  = 0;
    };
    std::optional<Best> best;
    bool converged = false;
    int restarts   = 0;

    for (int restart = 0; restart < opts.max_restarts && !converged; ++restart)
    {
        ++restarts;
        ComplexVector h0(K + 1);
        for (int i = 0; i <= K; ++i)
        {
            const double re = normal(rng);
            const double im = normal(rng);
            h0[i]           = Complex(re, im);
        }
        ComplexVector h = h0;

        ComplexMatrix X = ComplexMatrix::Zero(nx, nx);
        X.topLeftCorner(N, N) = AhA;
        ComplexMatrix H = ComplexMatrix::Zero(nh, nh);
        H.block(0, K + 1, K + 1, N - K)      = Tb.adjoint();
        H.block(0, nh - 1, K + 1, 1)         = h0;
        H.block(K + 1, 0, N - K, K + 1)      = Tb;
        H.block(N + 1, N + 1, N, N)          = AhA;
        H.block(nh - 1, 0, 1, K + 1)         = h0.adjoint();

        try
        {
            for (int it = 1; it <= opts.max_iters; ++it)
            {
                const ComplexMatrix Z = right_dual(h, N);

                X.topRightCorner(N, N - K)   = Z.adjoint();
                X.bottomLeftCorner(N - K, N) = Z;
                const ComplexVector s = solve_linear(X, rhs_x).x.head(N);

                H.block(K + 1, N + 1, N - K, N) = -Z;
                H.block(N + 1, K + 1, N, N - K) = -Z.adjoint();
                const ComplexVector h_new = solve_linear(H, rhs_h).x.head(K + 1);

                const double res2 = (A * s - y).squaredNorm();
                if (!best || res2 < best->residual)
                    best = Best{s, h_new, res2, it};
                h = h_new;
                if (res2 <= eta)
                {
                    converged = true;
                    break;
                }
            }
        }
        catch (const SingularSystemError&)
        {
            continue;
        }
    }

    if (!best)
        throw SingularSystemError("every GenFRI-TEM restart hit a singular system");

    ReconstructionResult res;
    res.filter          = AnnihilatingFilter{best->h};
    res.shifts          = shifts_from_filter(res.filter, T);
    res.fourier         = FourierVector(M, best->s.cwiseProduct(w.cwiseQuotient(
                                               model.gains.size() == 0
                                                   ? ComplexVector::Ones(N).eval()
                                                   : model.gains)),
                                        T);
    res.amplitudes      = recover_amplitudes(res.fourier, res.shifts, model.pulse).amplitudes;
    res.residual        = std::sqrt(best->residual);
    res.iterations_used = best->iterations;
    res.restarts_used   = restarts;
    res.converged       = converged;
    return res;
}

//------------------------------------------------------------------------------
// Error metric
//------------------------------------------------------------------------------

///
/// Normalized squared shift error `sum (tau_k - est_k)^2 / sum tau_k^2`.
/// Both lists are sorted and the estimate is matched by the cyclic rotation
/// with the smallest total squared circular distance
/// `min(|a - b|, T - |a - b|)`. If every true shift is zero the raw squared
/// error is returned.
///
inline double nmse_shifts(std::vector<double> truth, std::vector<double> est, double T)
{
    if (truth.size() != est.size())
        throw ArgumentError("nmse_shifts needs equal-length shift lists");
    if (truth.empty())
        return 0.0;
    std::sort(truth.begin(), truth.end());
    std::sort(est.begin(), est.end());
    const std::size_t K = truth.size();
    auto dist2 = [T](double a, double b) {
        double d = std::fmod(std::abs(a - b), T);
        d        = std::min(d, T - d);
        return d * d;
    };
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < K; ++r)
    {
        double acc = 0.0;
        for (std::size_t k = 0; k < K; ++k)
            acc += dist2(truth[k], est[(k + r) % K]);
        best = std::min(best, acc);
    }
    double denom = 0.0;
    for (double t : truth)
        denom += t * t;
    return denom > 0.0 ? best / denom : best;
}

} // namespace tempus_fri

#endif // TEMPUS_FRI_RECONSTRUCTION_HPP
