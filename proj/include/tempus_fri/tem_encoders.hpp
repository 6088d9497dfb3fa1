///
/// \file tem_encoders.hpp
///
/// Crossing (C-TEM) and integrate-and-fire (IF-TEM) time-encoding machines
/// acting on a filtered signal held as a trigonometric polynomial, the
/// decoder-side t-transform, trigger-time jitter and the sufficiency checks
/// for perfect recovery.
///
#ifndef TEMPUS_FRI_TEM_ENCODERS_HPP
#define TEMPUS_FRI_TEM_ENCODERS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <tempus_fri/error.hpp>
#include <tempus_fri/signal_model.hpp>

namespace tempus_fri
{

enum class MachineKind
{
    Crossing,
    IntegrateFire
};

inline const char* to_string(MachineKind kind)
{
    return kind == MachineKind::Crossing ? "ctem" : "iftem";
}

/// Sinusoidal reference r(t) = A cos(2 pi f t + phi) of a crossing machine.
struct CtemConfig
{
    double amplitude = 1.0;
    double frequency = 1.0;
    double phase     = 0.0;

    void validate() const
    {
        if (!(amplitude > 0.0))
            throw ArgumentError("C-TEM reference amplitude must be positive");
        if (!(frequency > 0.0))
            throw ArgumentError("C-TEM reference frequency must be positive");
        if (!std::isfinite(phase))
            throw ArgumentError("C-TEM reference phase must be finite");
    }

    double reference(double t) const
    {
        return amplitude * std::cos(two_pi * frequency * t + phase);
    }

    bool operator==(const CtemConfig&) const = default;
};

/// Integrate-and-fire parameters: bias b, integrator scale kappa, threshold
/// gamma and the integrator value at t = 0.
struct IftemConfig
{
    double bias            = 1.0;
    double scale           = 1.0;
    double threshold       = 0.1;
    double integrator_init = 0.0;

    void validate() const
    {
        if (!(bias > 0.0))
            throw ArgumentError("IF-TEM bias must be positive");
        if (!(scale > 0.0))
            throw ArgumentError("IF-TEM scale must be positive");
        if (!(threshold > 0.0))
            throw ArgumentError("IF-TEM threshold must be positive");
        if (!(integrator_init >= 0.0 && integrator_init < threshold))
            throw ArgumentError("IF-TEM integrator init must lie in [0, threshold)");
    }

    bool operator==(const IftemConfig&) const = default;
};

using ChannelConfig = std::variant<CtemConfig, IftemConfig>;

inline MachineKind machine_kind(const ChannelConfig& cfg)
{
    return std::holds_alternative<CtemConfig>(cfg) ? MachineKind::Crossing
                                                   : MachineKind::IntegrateFire;
}

///
/// Strictly increasing trigger times inside one period [0, T).
///
class TriggerSet
{
public:
    TriggerSet(std::vector<double> times, double period, MachineKind machine)
        : m_times(std::move(times)), m_period(period), m_machine(machine)
    {
        if (!(period > 0.0))
            throw ArgumentError("trigger period must be positive");
        for (std::size_t i = 0; i < m_times.size(); ++i)
        {
            if (!(m_times[i] >= 0.0 && m_times[i] < period))
                throw ArgumentError("trigger time outside [0, T)");
            if (i > 0 && !(m_times[i] > m_times[i - 1]))
                throw ArgumentError("trigger times must be strictly increasing");
        }
    }

    const std::vector<double>& times() const noexcept
    {
        return m_times;
    }
    std::size_t size() const noexcept
    {
        return m_times.size();
    }
    double period() const noexcept
    {
        return m_period;
    }
    MachineKind machine() const noexcept
    {
        return m_machine;
    }

    /// Largest gap between consecutive triggers, including the wrap-around
    /// gap t_1 + T - t_L when `periodic` is set.
    double max_gap(bool periodic) const
    {
        double g = 0.0;
        for (std::size_t i = 1; i < m_times.size(); ++i)
            g = std::max(g, m_times[i] - m_times[i - 1]);
        if (periodic && !m_times.empty())
            g = std::max(g, m_times.front() + m_period - m_times.back());
        return g;
    }

private:
    std::vector<double> m_times;
    double m_period;
    MachineKind m_machine;
};

/// Values reported by the machine: y(t_n) for C-TEM, local integrals for IF-TEM.
struct MeasurementVector
{
    std::vector<double> values;
    MachineKind machine;
};

/// Output of one encoder run.
struct Encoding
{
    TriggerSet triggers;
    MeasurementVector measurements;
    std::vector<std::string> warnings;
};

//------------------------------------------------------------------------------
// Crossing machine
//------------------------------------------------------------------------------

/// Reference values r(t_n); the measurements a crossing machine reports.
inline MeasurementVector ctem_measurements(const TriggerSet& times, const CtemConfig& cfg)
{
    MeasurementVector out{{}, MachineKind::Crossing};
    out.values.reserve(times.size());
    for (double t : times.times())
        out.values.push_back(cfg.reference(t));
    return out;
}

///
/// Crossing-time encoding of y against the sinusoidal reference.
///
/// Sign changes of y - r are located on a uniform grid of
/// `max(4096, 64 (2M+1), 64 ceil(f T))` points per period and each bracket is
/// bisected to machine precision. Tangential touches are not reported.
///
inline Encoding ctem_encode(const FourierVector& y, const CtemConfig& cfg)
{
    cfg.validate();
    const double T = y.period();
    const int grid = std::max({4096, 64 * y.size(),
                               64 * static_cast<int>(std::ceil(cfg.frequency * T))});
    const double dt = T / grid;

    auto diff = [&](double t) { return eval_trig_complex(y, t).real() - cfg.reference(t); };

    std::vector<double> times;
    double ta = 0.0;
    double da = diff(ta);
    for (int i = 0; i < grid; ++i)
    {
        const double tb = (i + 1 == grid) ? T : (i + 1) * dt;
        const double db = diff(tb);
        if (da == 0.0)
        {
            times.push_back(ta);
        }
        else if ((da < 0.0) != (db < 0.0) && db != 0.0)
        {
            double lo = ta, hi = tb, dlo = da;
            for (int it = 0; it < 200; ++it)
            {
                const double mid = 0.5 * (lo + hi);
                if (mid <= lo || mid >= hi)
                    break;
                const double dm = diff(mid);
                if (dm == 0.0)
                {
                    lo = hi = mid;
                    break;
                }
                if ((dm < 0.0) == (dlo < 0.0))
                {
                    lo  = mid;
                    dlo = dm;
                }
                else
                {
                    hi = mid;
                }
            }
            const double root = std::abs(diff(lo)) <= std::abs(diff(hi)) ? lo : hi;
            if (root < T && (times.empty() || root > times.back()))
                times.push_back(root);
        }
        ta = tb;
        da = db;
    }

    if (times.empty())
        throw EmptyTriggerError("crossing detector found no crossings in one period");

    Encoding enc{TriggerSet(std::move(times), T, MachineKind::Crossing),
                 MeasurementVector{{}, MachineKind::Crossing},
                 {}};
    enc.measurements = ctem_measurements(enc.triggers, cfg);

    const double ysup = sup_norm(y);
    if (cfg.amplitude < ysup)
        enc.warnings.push_back("reference amplitude " + std::to_string(cfg.amplitude) +
                               " is below the signal peak " + std::to_string(ysup) +
                               "; the trigger density guarantee does not apply");
    return enc;
}

//------------------------------------------------------------------------------
// Integrate-and-fire machine
//------------------------------------------------------------------------------

///
/// t-transform: local integrals `-b (t_{n+1} - t_n) + kappa gamma` computed
/// from trigger times alone.
///
inline MeasurementVector t_transform(const TriggerSet& times, const IftemConfig& cfg)
{
    if (times.size() < 2)
        throw ArgumentError("t_transform needs at least two trigger times");
    if (times.machine() != MachineKind::IntegrateFire)
        throw ArgumentError("t_transform applies to integrate-and-fire triggers only");
    MeasurementVector out{{}, MachineKind::IntegrateFire};
    const auto& t = times.times();
    out.values.reserve(t.size() - 1);
    for (std::size_t n = 0; n + 1 < t.size(); ++n)
        out.values.push_back(-cfg.bias * (t[n + 1] - t[n]) + cfg.scale * cfg.threshold);
    return out;
}

///
/// Integrate-and-fire encoding of y. Each trigger solves
/// `int_{t_n}^{t} (b + y) = kappa (gamma - v_n)` by safeguarded Newton
/// iteration on the bracket implied by the spacing bounds; v_n is the
/// integrator value after the previous reset (integrator_init at t = 0).
/// Triggers at or beyond T (within 1e-12 T) end the encoding.
///
inline Encoding iftem_encode(const FourierVector& y, const IftemConfig& cfg)
{
    cfg.validate();
    const double T    = y.period();
    const double b    = cfg.bias;
    const double ysup = sup_norm(y);
    if (!(b > ysup))
        throw PreconditionError("IF-TEM bias " + std::to_string(b) +
                                " does not exceed the signal peak " + std::to_string(ysup));
    // The grid maximum slightly underestimates the true sup.
    const double ybound = std::min(ysup * 1.01 + 1e-12, 0.5 * (b + ysup));

    std::vector<double> times;
    double t_prev = 0.0;
    double v      = cfg.integrator_init;
    const double t_end = T * (1.0 - 1e-12);

    while (true)
    {
        const double target = cfg.scale * (cfg.threshold - v);
        auto F = [&](double s) { return b * (s - t_prev) + integral_trig(y, t_prev, s); };

        double lo = t_prev + target / (b + ybound);
        double hi = t_prev + target / (b - ybound);
        while (F(lo) > target)
            lo = t_prev + 0.5 * (lo - t_prev);
        while (F(hi) < target)
            hi = t_prev + 2.0 * (hi - t_prev);

        if (lo >= t_end)
            break;

        double s = 0.5 * (lo + hi);
        for (int it = 0; it < 100; ++it)
        {
            const double r = F(s) - target;
            if (r == 0.0)
                break;
            if (r < 0.0)
                lo = s;
            else
                hi = s;
            const double slope = b + eval_trig_complex(y, s).real();
            double next        = s - r / slope;
            if (!(next > lo && next < hi))
                next = 0.5 * (lo + hi);
            if (std::abs(next - s) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, s))
            {
                s = next;
                break;
            }
            s = next;
        }

        if (s >= t_end)
            break;
        times.push_back(s);
        t_prev = s;
        v      = 0.0;
    }

    if (times.size() < 2)
        throw InsufficientTriggerError("integrate-and-fire machine produced " +
                                       std::to_string(times.size()) +
                                       " trigger(s) in one period");

    TriggerSet ts(std::move(times), T, MachineKind::IntegrateFire);
    MeasurementVector meas = t_transform(ts, cfg);
    return Encoding{std::move(ts), std::move(meas), {}};
}

//------------------------------------------------------------------------------
// Jitter
//------------------------------------------------------------------------------

///
/// Perturbs every trigger by an independent draw from U[-sigma/2, sigma/2].
/// Times leaving [0, T) are reflected back; the result is sorted and times
/// closer than 1e-12 T are merged so the output is again a valid TriggerSet.
/// The same seed yields the same uniform draws for every sigma.
///
inline TriggerSet add_jitter(const TriggerSet& times, double sigma, std::uint64_t seed)
{
    if (!(sigma >= 0.0))
        throw ArgumentError("jitter sigma must be nonnegative");
    if (sigma == 0.0)
        return times;

    const double T = times.period();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-0.5, 0.5);

    std::vector<double> out;
    out.reserve(times.size());
    for (double t : times.times())
    {
        double s = t + sigma * unif(rng);
        for (int guard = 0; guard < 64 && !(s >= 0.0 && s < T); ++guard)
        {
            if (s < 0.0)
                s = -s;
            if (s >= T)
                s = 2.0 * T - s;
            if (s >= T)
                s = std::nextafter(T, 0.0);
        }
        out.push_back(s);
    }
    std::sort(out.begin(), out.end());
    std::vector<double> uniq;
    uniq.reserve(out.size());
    for (double s : out)
        if (uniq.empty() || s - uniq.back() > 1e-12 * T)
            uniq.push_back(s);
    return TriggerSet(std::move(uniq), T, times.machine());
}

//------------------------------------------------------------------------------
// Sufficiency checks
//------------------------------------------------------------------------------

///
/// Report of the crossing-machine sufficiency conditions for C channels:
/// enough triggers, reference amplitude strictly above the signal peak and
/// reference frequency at least (2K+1)/(C T).
///
struct CtemSufficiency
{
    int K                   = 0;
    int channels            = 1;
    int triggers            = 0;
    double signal_sup       = 0.0;
    double min_frequency    = 0.0;
    bool enough_triggers    = false;
    bool amplitude_ok       = false;
    bool amplitude_boundary = false; ///< A equals the peak: density bound holds, recovery bound does not
    bool frequency_ok       = false;

    bool sufficient() const
    {
        return enough_triggers && amplitude_ok && frequency_ok;
    }
};

/// Checks against a precomputed signal peak and trigger count.
inline CtemSufficiency ctem_sufficiency(double signal_sup, int K, double T, const CtemConfig& cfg,
                                        int triggers, int channels = 1)
{
    cfg.validate();
    if (channels < 1)
        throw ArgumentError("channel count must be positive");
    CtemSufficiency r;
    r.K                  = K;
    r.channels           = channels;
    r.triggers           = triggers;
    r.signal_sup         = signal_sup;
    r.min_frequency      = (2.0 * K + 1.0) / (channels * T);
    r.enough_triggers    = static_cast<long>(triggers) * channels >= 2L * K + 1;
    r.amplitude_ok       = cfg.amplitude > signal_sup;
    r.amplitude_boundary = cfg.amplitude == signal_sup;
    r.frequency_ok       = cfg.frequency >= r.min_frequency;
    return r;
}

/// Encodes the filtered signal to count triggers, then checks.
inline CtemSufficiency check_ctem_sufficiency(const FriSignal& signal, const SamplingKernel& kernel,
                                              const CtemConfig& cfg, int channels = 1)
{
    const FourierVector y = filtered_signal(signal, kernel);
    int L                 = 0;
    try
    {
        L = static_cast<int>(ctem_encode(y, cfg).triggers.size());
    }
    catch (const EmptyTriggerError&)
    {
        L = 0;
    }
    return ctem_sufficiency(sup_norm(y), signal.K(), signal.period(), cfg, L, channels);
}

///
/// Integrate-and-fire condition `kappa gamma / (b - |y|) < C T / L` and the
/// measurement count condition `C (L - 1) >= 2K + 1`.
///
struct IftemSufficiency
{
    int K                   = 0;
    int channels            = 1;
    int triggers            = 0;
    double signal_sup       = 0.0;
    double lhs              = 0.0;
    double rhs              = 0.0;
    bool spacing_ok         = false;
    bool enough_measurements = false;

    bool sufficient() const
    {
        return spacing_ok && enough_measurements;
    }
};

inline IftemSufficiency iftem_sufficiency(double signal_sup, int K, double T,
                                          const IftemConfig& cfg, int L, int channels = 1)
{
    cfg.validate();
    if (L < 1 || channels < 1)
        throw ArgumentError("trigger and channel counts must be positive");
    if (!(cfg.bias > signal_sup))
        throw PreconditionError("IF-TEM bias does not exceed the signal peak");
    IftemSufficiency r;
    r.K                   = K;
    r.channels            = channels;
    r.triggers            = L;
    r.signal_sup          = signal_sup;
    r.lhs                 = cfg.scale * cfg.threshold / (cfg.bias - signal_sup);
    r.rhs                 = channels * T / L;
    r.spacing_ok          = r.lhs < r.rhs;
    r.enough_measurements = static_cast<long>(channels) * (L - 1) >= 2L * K + 1;
    return r;
}

inline IftemSufficiency check_iftem_sufficiency(const FriSignal& signal,
                                                const SamplingKernel& kernel,
                                                const IftemConfig& cfg, int L, int channels = 1)
{
    const FourierVector y = filtered_signal(signal, kernel);
    return iftem_sufficiency(sup_norm(y), signal.K(), signal.period(), cfg, L, channels);
}

//------------------------------------------------------------------------------
// Multichannel
//------------------------------------------------------------------------------

///
/// Encodes y independently with every channel. Identical channel
/// configurations are rejected up front, and trigger times that coincide
/// across channels (within 1e-12 T) raise DegenerateSamplingError.
///
inline std::vector<Encoding> multichannel_encode(const FourierVector& y,
                                                 const std::vector<ChannelConfig>& channels)
{
    if (channels.empty())
        throw ConfigurationError("multichannel encoding needs at least one channel");
    for (std::size_t i = 0; i < channels.size(); ++i)
        for (std::size_t j = i + 1; j < channels.size(); ++j)
            if (channels[i] == channels[j])
                throw ConfigurationError("channels " + std::to_string(i) + " and " +
                                         std::to_string(j) + " are identical");

    std::vector<Encoding> out;
    out.reserve(channels.size());
    for (const auto& ch : channels)
    {
        if (const auto* c = std::get_if<CtemConfig>(&ch))
            out.push_back(ctem_encode(y, *c));
        else
            out.push_back(iftem_encode(y, std::get<IftemConfig>(ch)));
    }

    const double tol = 1e-12 * y.period();
    for (std::size_t i = 0; i < out.size(); ++i)
        for (std::size_t j = i + 1; j < out.size(); ++j)
        {
            const auto& a = out[i].triggers.times();
            const auto& b = out[j].triggers.times();
            std::size_t p = 0, q = 0;
            while (p < a.size() && q < b.size())
            {
                if (std::abs(a[p] - b[q]) <= tol)
                    throw DegenerateSamplingError("channels " + std::to_string(i) + " and " +
                                                  std::to_string(j) +
                                                  " share a trigger time");
                if (a[p] < b[q])
                    ++p;
                else
                    ++q;
            }
        }
    return out;
}

//------------------------------------------------------------------------------
// CSV
//------------------------------------------------------------------------------

/// Writes `index,time,value`; the last IF-TEM row has an empty value.
inline void write_triggers_csv(std::ostream& os, const TriggerSet& times,
                               const MeasurementVector& meas)
{
    os << "index,time,value\n";
    os << std::setprecision(17);
    for (std::size_t n = 0; n < times.size(); ++n)
    {
        os << n << ',' << times.times()[n] << ',';
        if (n < meas.values.size())
            os << meas.values[n];
        os << '\n';
    }
}

/// Reads the times of a `index,time,value` table.
inline TriggerSet read_triggers_csv(std::istream& is, double period, MachineKind machine)
{
    std::string line;
    if (!std::getline(is, line) || line.rfind("index,time", 0) != 0)
        throw ArgumentError("trigger CSV must start with an index,time,value header");
    std::vector<double> times;
    while (std::getline(is, line))
    {
        if (line.empty())
            continue;
        std::istringstream ss(line);
        std::string idx, t;
        if (!std::getline(ss, idx, ',') || !std::getline(ss, t, ','))
            throw ArgumentError("malformed trigger CSV row: " + line);
        times.push_back(std::stod(t));
    }
    return TriggerSet(std::move(times), period, machine);
}

} // namespace tempus_fri

#endif // TEMPUS_FRI_TEM_ENCODERS_HPP
