///
/// \file experiments.hpp
///
/// Declarative experiment runs: configuration parsing, signal and machine
/// resolution, noise-free and jittered Monte Carlo runs, tabular output.
///
#ifndef TEMPUS_FRI_EXPERIMENTS_HPP
#define TEMPUS_FRI_EXPERIMENTS_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include <tempus_fri/error.hpp>
#include <tempus_fri/reconstruction.hpp>
#include <tempus_fri/signal_model.hpp>
#include <tempus_fri/tem_encoders.hpp>

namespace tempus_fri
{

inline constexpr const char* library_version = "0.1.0";

using Json = nlohmann::json;

//------------------------------------------------------------------------------
// Configuration
//------------------------------------------------------------------------------

struct SignalSpec
{
    enum class Kind
    {
        RandomDirac,
        Explicit
    };
    Kind kind              = Kind::RandomDirac;
    double period          = 1.0;
    int K                  = 5;
    std::uint64_t seed     = 1;
    double amplitude_mean  = 0.5;
    double amplitude_std   = 1.0;
    double min_gap_factor  = 8.0; ///< resample until the min circular gap exceeds T / (factor K)
    PulseDescriptor pulse  = PulseDescriptor::dirac();
    std::vector<double> amplitudes;
    std::vector<double> shifts;
};

struct KernelSpec
{
    int M = -1;                  ///< negative: M = K
    std::optional<double> gain;  ///< uniform gain
    std::optional<double> peak;  ///< uniform gain chosen so that sup|y| equals this value
};

/// A C-TEM channel whose phase is drawn at resolution time when `random_phase` is set.
struct ChannelSpec
{
    ChannelConfig config;
    bool random_phase = false;
};

/// One reconstruction unit: a single channel or a multichannel bank.
struct MachineSpec
{
    std::string label;
    std::vector<ChannelSpec> channels;
};

struct NoiseSpec
{
    std::vector<double> sigmas{0.0};
    int trials = 1;
};

struct SolverSpec
{
    enum class Method
    {
        GenFri,
        Direct
    };
    Method method = Method::GenFri;
    std::optional<double> eta; ///< empty: automatic
    int max_iters    = 50;
    int max_restarts = 50;
};

struct OutputSpec
{
    std::string path;
    std::string format = "csv";
    bool timing        = false;
};

struct RunConfig
{
    SignalSpec signal;
    KernelSpec kernel;
    std::vector<MachineSpec> machines;
    NoiseSpec noise;
    SolverSpec solver;
    OutputSpec output;
    std::uint64_t seed = 0;
    int jobs           = 1;

    void validate() const
    {
        if (machines.empty())
            throw ConfigurationError("machine list is empty");
        for (const auto& m : machines)
            if (m.channels.empty())
                throw ConfigurationError("machine '" + m.label + "' has no channels");
        if (noise.trials < 1)
            throw ConfigurationError("trials must be at least 1");
        for (double s : noise.sigmas)
            if (!(s >= 0.0) || !std::isfinite(s))
                throw ConfigurationError("jitter sigma values must be finite and nonnegative");
        if (noise.sigmas.empty())
            throw ConfigurationError("sigma list is empty");
        if (signal.K < 1)
            throw ConfigurationError("signal K must be positive");
        if (solver.max_iters < 1 || solver.max_restarts < 1)
            throw ConfigurationError("solver budgets must be positive");
        if (output.format != "csv" && output.format != "json")
            throw ConfigurationError("output format must be csv or json");
        if (jobs < 1)
            throw ConfigurationError("jobs must be at least 1");
    }
};

namespace detail
{

template <class T>
T json_get(const Json& j, const char* key, T fallback)
{
    auto it = j.find(key);
    return it == j.end() ? fallback : it->template get<T>();
}

inline PulseDescriptor pulse_from_json(const Json& j)
{
    for (const auto& [key, value] : j.items())
        if (key != "type" && key != "degree" && key != "time_scale")
            throw ConfigurationError("unknown pulse field '" + key + "'");
    const std::string type = json_get<std::string>(j, "type", "dirac");
    if (type == "dirac")
        return PulseDescriptor::dirac();
    if (type == "bspline")
        return PulseDescriptor::bspline(json_get<int>(j, "degree", 3), json_get<double>(j, "time_scale", 1.0));
    throw ConfigurationError("unknown pulse type '" + type + "'");
}

inline Json pulse_to_json(const PulseDescriptor& p)
{
    if (const auto* b = std::get_if<BSplinePulse>(&p.kind()))
        return Json{{"type", "bspline"}, {"degree", b->degree}, {"time_scale", b->time_scale}};
    if (p.is_dirac())
        return Json{{"type", "dirac"}};
    throw ConfigurationError("tabulated pulses cannot be serialized");
}

inline ChannelSpec channel_from_json(const Json& j, const std::string& type)
{
    ChannelSpec ch;
    if (type == "ctem")
    {
        CtemConfig c;
        c.amplitude = j.at("amplitude").get<double>();
        c.frequency = j.at("frequency").get<double>();
        auto ph     = j.find("phase");
        if (ph != j.end() && ph->is_string())
        {
            if (ph->get<std::string>() != "random")
                throw ConfigurationError("phase must be a number or \"random\"");
            ch.random_phase = true;
        }
        else if (ph != j.end())
        {
            c.phase = ph->get<double>();
        }
        ch.config = c;
    }
    else if (type == "iftem")
    {
        IftemConfig c;
        c.bias            = j.at("bias").get<double>();
        c.scale           = json_get<double>(j, "scale", 1.0);
        c.threshold       = j.at("threshold").get<double>();
        c.integrator_init = json_get<double>(j, "integrator_init", 0.0);
        ch.config         = c;
    }
    else
    {
        throw ConfigurationError("unknown machine type '" + type + "'");
    }
    return ch;
}

inline Json channel_to_json(const ChannelSpec& ch)
{
    if (const auto* c = std::get_if<CtemConfig>(&ch.config))
    {
        Json j{{"amplitude", c->amplitude}, {"frequency", c->frequency}};
        if (ch.random_phase)
            j["phase"] = "random";
        else
            j["phase"] = c->phase;
        return j;
    }
    const auto& c = std::get<IftemConfig>(ch.config);
    return Json{{"bias", c.bias},
                {"scale", c.scale},
                {"threshold", c.threshold},
                {"integrator_init", c.integrator_init}};
}

} // namespace detail

///
/// Parses a run configuration. Sections: `signal`, `kernel`, `machines`,
/// `noise`, `solver`, `output` and the top-level `seed` and `jobs`.
///
inline RunConfig run_config_from_json(const Json& j)
{
    using detail::json_get;
    RunConfig cfg;
    try
    {
        const Json& s = j.at("signal");
        const std::string kind = json_get<std::string>(s, "kind", "random_dirac");
        cfg.signal.period      = json_get<double>(s, "period", 1.0);
        if (kind == "random_dirac")
        {
            cfg.signal.kind           = SignalSpec::Kind::RandomDirac;
            cfg.signal.K              = json_get<int>(s, "K", 5);
            cfg.signal.seed           = json_get<std::uint64_t>(s, "seed", 1);
            cfg.signal.amplitude_mean = json_get<double>(s, "amplitude_mean", 0.5);
            cfg.signal.amplitude_std  = json_get<double>(s, "amplitude_std", 1.0);
            cfg.signal.min_gap_factor = json_get<double>(s, "min_gap_factor", 8.0);
        }
        else if (kind == "explicit")
        {
            cfg.signal.kind       = SignalSpec::Kind::Explicit;
            cfg.signal.amplitudes = s.at("amplitudes").get<std::vector<double>>();
            cfg.signal.shifts     = s.at("shifts").get<std::vector<double>>();
            cfg.signal.K          = static_cast<int>(cfg.signal.shifts.size());
            if (auto p = s.find("pulse"); p != s.end())
                cfg.signal.pulse = detail::pulse_from_json(*p);
        }
        else
        {
            throw ConfigurationError("unknown signal kind '" + kind + "'");
        }

        if (auto k = j.find("kernel"); k != j.end())
        {
            cfg.kernel.M = json_get<int>(*k, "M", -1);
            if (k->contains("gain"))
                cfg.kernel.gain = k->at("gain").get<double>();
            if (k->contains("peak"))
                cfg.kernel.peak = k->at("peak").get<double>();
            if (cfg.kernel.gain && cfg.kernel.peak)
                throw ConfigurationError("kernel accepts either gain or peak, not both");
        }

        for (const auto& m : j.at("machines"))
        {
            MachineSpec spec;
            const std::string type = m.at("type").get<std::string>();
            spec.label             = json_get<std::string>(m, "label", type);
            if (auto ch = m.find("channels"); ch != m.end())
                for (const auto& c : *ch)
                    spec.channels.push_back(detail::channel_from_json(c, type));
            else
                spec.channels.push_back(detail::channel_from_json(m, type));
            cfg.machines.push_back(std::move(spec));
        }

        if (auto n = j.find("noise"); n != j.end())
        {
            cfg.noise.sigmas = json_get<std::vector<double>>(*n, "sigmas", {0.0});
            cfg.noise.trials = json_get<int>(*n, "trials", 1);
        }
        if (auto so = j.find("solver"); so != j.end())
        {
            const std::string method = json_get<std::string>(*so, "method", "genfri");
            if (method == "genfri")
                cfg.solver.method = SolverSpec::Method::GenFri;
            else if (method == "direct")
                cfg.solver.method = SolverSpec::Method::Direct;
            else
                throw ConfigurationError("unknown solver method '" + method + "'");
            if (auto e = so->find("eta"); e != so->end() && e->is_number())
                cfg.solver.eta = e->get<double>();
            cfg.solver.max_iters    = json_get<int>(*so, "max_iters", 50);
            cfg.solver.max_restarts = json_get<int>(*so, "max_restarts", 50);
        }
        if (auto o = j.find("output"); o != j.end())
        {
            cfg.output.path   = json_get<std::string>(*o, "path", "");
            cfg.output.format = json_get<std::string>(*o, "format", "csv");
            cfg.output.timing = json_get<bool>(*o, "timing", false);
        }
        cfg.seed = json_get<std::uint64_t>(j, "seed", 0);
        cfg.jobs = json_get<int>(j, "jobs", 1);
    }
    catch (const Json::exception& e)
    {
        throw ConfigurationError(std::string("malformed run configuration: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

inline Json run_config_to_json(const RunConfig& cfg)
{
    Json s;
    s["period"] = cfg.signal.period;
    if (cfg.signal.kind == SignalSpec::Kind::RandomDirac)
    {
        s["kind"]           = "random_dirac";
        s["K"]              = cfg.signal.K;
        s["seed"]           = cfg.signal.seed;
        s["amplitude_mean"] = cfg.signal.amplitude_mean;
        s["amplitude_std"]  = cfg.signal.amplitude_std;
        s["min_gap_factor"] = cfg.signal.min_gap_factor;
    }
    else
    {
        s["kind"]       = "explicit";
        s["amplitudes"] = cfg.signal.amplitudes;
        s["shifts"]     = cfg.signal.shifts;
        s["pulse"]      = detail::pulse_to_json(cfg.signal.pulse);
    }
    Json k{{"M", cfg.kernel.M}};
    if (cfg.kernel.gain)
        k["gain"] = *cfg.kernel.gain;
    if (cfg.kernel.peak)
        k["peak"] = *cfg.kernel.peak;
    Json machines = Json::array();
    for (const auto& m : cfg.machines)
    {
        Json mj{{"label", m.label},
                {"type", to_string(machine_kind(m.channels.front().config))},
                {"channels", Json::array()}};
        for (const auto& ch : m.channels)
            mj["channels"].push_back(detail::channel_to_json(ch));
        machines.push_back(std::move(mj));
    }
    Json solver{{"method", cfg.solver.method == SolverSpec::Method::GenFri ? "genfri" : "direct"},
                {"max_iters", cfg.solver.max_iters},
                {"max_restarts", cfg.solver.max_restarts}};
    solver["eta"] = cfg.solver.eta ? Json(*cfg.solver.eta) : Json("auto");
    return Json{{"signal", s},
                {"kernel", k},
                {"machines", machines},
                {"noise", {{"sigmas", cfg.noise.sigmas}, {"trials", cfg.noise.trials}}},
                {"solver", solver},
                {"output", {{"path", cfg.output.path}, {"format", cfg.output.format}, {"timing", cfg.output.timing}}},
                {"seed", cfg.seed},
                {"jobs", cfg.jobs}};
}

inline RunConfig load_run_config(const std::string& path)
{
    std::ifstream is(path);
    if (!is)
        throw IoError("cannot open configuration file '" + path + "'");
    Json j;
    try
    {
        is >> j;
    }
    catch (const Json::exception& e)
    {
        throw ConfigurationError("'" + path + "': " + e.what());
    }
    return run_config_from_json(j);
}

//------------------------------------------------------------------------------
// Resolution
//------------------------------------------------------------------------------

namespace detail
{

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(const std::string& s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s)
    {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace detail

///
/// Draws K Dirac amplitudes from N(mean, std) and shifts from U[0, T),
/// redrawing the whole set until the smallest circular gap exceeds
/// T / (min_gap_factor K).
///
inline FriSignal random_dirac_signal(int K, double T, std::uint64_t seed, double mean = 0.5,
                                     double stddev = 1.0, double min_gap_factor = 8.0)
{
    if (K < 1)
        throw ArgumentError("K must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(mean, stddev);
    std::uniform_real_distribution<double> ud(0.0, T);
    std::vector<double> c(K), t(K);
    const double min_gap = min_gap_factor > 0.0 ? T / (min_gap_factor * K) : 0.0;
    for (int attempt = 0; attempt < 100000; ++attempt)
    {
        for (int k = 0; k < K; ++k)
        {
            c[k] = nd(rng);
            t[k] = ud(rng);
        }
        std::vector<double> s = t;
        std::sort(s.begin(), s.end());
        double gap = s.front() + T - s.back();
        for (int k = 1; k < K; ++k)
            gap = std::min(gap, s[k] - s[k - 1]);
        if (gap > min_gap)
            return FriSignal(T, PulseDescriptor::dirac(), c, t);
    }
    throw ConfigurationError("could not draw shifts with the requested minimum separation");
}

struct ResolvedMachine
{
    std::string label;
    std::vector<ChannelConfig> channels;
};

/// Everything a run needs, with random choices made.
struct ResolvedExperiment
{
    FriSignal signal;
    SamplingKernel kernel;
    FourierVector filtered;
    SpectralModel model;
    std::vector<ResolvedMachine> machines;
};

inline ResolvedExperiment resolve(const RunConfig& cfg)
{
    cfg.validate();
    const auto& ss = cfg.signal;
    FriSignal signal = ss.kind == SignalSpec::Kind::RandomDirac
                           ? random_dirac_signal(ss.K, ss.period, ss.seed, ss.amplitude_mean,
                                                 ss.amplitude_std, ss.min_gap_factor)
                           : FriSignal(ss.period, ss.pulse, ss.amplitudes, ss.shifts);
    const int M = cfg.kernel.M < 0 ? signal.K() : cfg.kernel.M;
    if (M < signal.K())
        throw ConfigurationError("kernel M must be at least K");

    SamplingKernel kernel(M, signal.period());
    if (cfg.kernel.gain)
    {
        kernel = SamplingKernel::uniform(M, signal.period(), *cfg.kernel.gain);
    }
    else if (cfg.kernel.peak)
    {
        const double raw = sup_norm(filtered_signal(signal, kernel));
        if (!(raw > 0.0) || !(*cfg.kernel.peak > 0.0))
            throw ConfigurationError("kernel peak normalization needs a nonzero signal and target");
        kernel = SamplingKernel::uniform(M, signal.period(), *cfg.kernel.peak / raw);
    }
    FourierVector y = filtered_signal(signal, kernel);
    SpectralModel model{signal.pulse(), kernel.gains()};

    std::mt19937_64 phase_rng(detail::splitmix64(cfg.seed ^ 0x7068617365ULL));
    std::uniform_real_distribution<double> phase_dist(0.0, two_pi);
    std::vector<ResolvedMachine> machines;
    for (const auto& m : cfg.machines)
    {
        ResolvedMachine rm{m.label, {}};
        for (const auto& ch : m.channels)
        {
            ChannelConfig c = ch.config;
            if (ch.random_phase)
                std::get<CtemConfig>(c).phase = phase_dist(phase_rng);
            rm.channels.push_back(c);
        }
        machines.push_back(std::move(rm));
    }
    return ResolvedExperiment{std::move(signal), std::move(kernel), std::move(y), std::move(model),
                              std::move(machines)};
}

//------------------------------------------------------------------------------
// Trial records
//------------------------------------------------------------------------------

struct TrialRecord
{
    int trial     = 0;
    double sigma  = 0.0;
    std::string machine;
    double nmse            = 0.0;
    double amplitude_error = 0.0;
    double residual        = 0.0;
    bool converged         = false;
    int iterations         = 0;
    int restarts           = 0;
    std::vector<double> true_shifts;
    std::vector<double> est_shifts;
    std::vector<double> true_amplitudes;
    std::vector<double> est_amplitudes;
    std::vector<int> triggers;  ///< per channel
    std::vector<int> deficits;  ///< per channel: unknowns minus equations when positive
    std::vector<std::string> warnings;
    std::string error;
    double runtime_ms = 0.0;
};

/// Failure raised while encoding or decoding one machine.
class MachineError : public Error
{
public:
    MachineError(const std::string& machine, const std::string& what)
        : Error("machine '" + machine + "': " + what), m_machine(machine)
    {
    }
    const std::string& machine() const noexcept
    {
        return m_machine;
    }

private:
    std::string m_machine;
};

namespace detail
{

// Per-measurement jitter variance of one channel.
inline double measurement_variance(const ChannelConfig& ch, double sigma)
{
    if (const auto* c = std::get_if<CtemConfig>(&ch))
    {
        const double slope = two_pi * c->amplitude * c->frequency;
        return slope * slope * sigma * sigma / 12.0;
    }
    const double b = std::get<IftemConfig>(ch).bias;
    return 2.0 * b * b * sigma * sigma / 12.0;
}

// Largest |c_k - c_hat_k| after aligning both lists by the best cyclic rotation of sorted shifts.
inline double amplitude_error(const std::vector<double>& t, const std::vector<double>& c,
                              const std::vector<double>& te, const std::vector<double>& ce, double T)
{
    const std::size_t K = t.size();
    if (K == 0 || te.size() != K || ce.size() != K)
        return std::numeric_limits<double>::quiet_NaN();
    std::vector<std::size_t> a(K), b(K);
    std::iota(a.begin(), a.end(), 0);
    std::iota(b.begin(), b.end(), 0);
    std::sort(a.begin(), a.end(), [&](auto i, auto j) { return t[i] < t[j]; });
    std::sort(b.begin(), b.end(), [&](auto i, auto j) { return te[i] < te[j]; });
    auto d2 = [T](double x, double y) {
        double d = std::fmod(std::abs(x - y), T);
        d        = std::min(d, T - d);
        return d * d;
    };
    std::size_t best_r = 0;
    double best        = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < K; ++r)
    {
        double acc = 0.0;
        for (std::size_t k = 0; k < K; ++k)
            acc += d2(t[a[k]], te[b[(k + r) % K]]);
        if (acc < best)
        {
            best   = acc;
            best_r = r;
        }
    }
    double worst = 0.0;
    for (std::size_t k = 0; k < K; ++k)
        worst = std::max(worst, std::abs(c[a[k]] - ce[b[(k + best_r) % K]]));
    return worst;
}

} // namespace detail

///
/// Jitter draws for trial `trial`, machine `m`, channel `c`: the seed depends
/// only on these indices and the master seed, never on sigma.
///
inline std::uint64_t jitter_seed(std::uint64_t master, int trial, std::size_t machine, std::size_t channel)
{
    std::uint64_t s = detail::splitmix64(master + static_cast<std::uint64_t>(trial));
    s               = detail::splitmix64(s ^ (0x100000000ULL * (machine + 1)));
    return detail::splitmix64(s ^ (channel + 1));
}

///
/// Reconstructs one machine from its (possibly jittered) trigger sets and
/// fills a record. Solver failures are caught and recorded as non-converged.
///
inline TrialRecord reconstruct_machine(const ResolvedExperiment& ex, const ResolvedMachine& machine,
                                       const std::vector<TriggerSet>& triggers, const SolverSpec& solver,
                                       double sigma, int trial, std::uint64_t solver_seed)
{
    TrialRecord rec;
    rec.trial           = trial;
    rec.sigma           = sigma;
    rec.machine         = machine.label;
    rec.true_shifts     = ex.signal.shifts();
    rec.true_amplitudes = ex.signal.amplitudes();
    const int K = ex.signal.K();
    const int M = ex.kernel.M();
    const double T = ex.signal.period();

    try
    {
        std::vector<ForwardSystem> systems;
        double eta = 0.0;
        for (std::size_t c = 0; c < machine.channels.size(); ++c)
        {
            systems.push_back(make_system(triggers[c], machine.channels[c], M));
            const auto rows = systems.back().rows();
            rec.triggers.push_back(static_cast<int>(triggers[c].size()));
            rec.deficits.push_back(std::max<int>(0, 2 * M + 1 - static_cast<int>(rows)));
            eta += static_cast<double>(rows) * detail::measurement_variance(machine.channels[c], sigma);
        }
        const ForwardSystem sys = stack_channels(systems);

        ReconstructionResult res;
        if (solver.method == SolverSpec::Method::Direct)
        {
            res = decode_direct(sys, K, ex.model);
        }
        else
        {
            GenFriOptions o;
            o.max_iters    = solver.max_iters;
            o.max_restarts = solver.max_restarts;
            o.seed         = solver_seed;
            o.eta          = solver.eta ? *solver.eta : (sigma > 0.0 ? eta : -1.0);
            res            = genfri_tem(sys, K, o, ex.model);
        }
        rec.est_shifts      = res.shifts;
        rec.est_amplitudes  = res.amplitudes;
        rec.residual        = res.residual;
        rec.converged       = res.converged;
        rec.iterations      = res.iterations_used;
        rec.restarts        = res.restarts_used;
        rec.nmse            = nmse_shifts(rec.true_shifts, rec.est_shifts, T);
        rec.amplitude_error = detail::amplitude_error(rec.true_shifts, rec.true_amplitudes,
                                                      rec.est_shifts, rec.est_amplitudes, T);
    }
    catch (const Error& e)
    {
        rec.converged       = false;
        rec.nmse            = std::numeric_limits<double>::quiet_NaN();
        rec.amplitude_error = std::numeric_limits<double>::quiet_NaN();
        rec.residual        = std::numeric_limits<double>::quiet_NaN();
        rec.error           = e.what();
    }
    return rec;
}

/// Smallest per-channel trigger count giving 2K+1 integrate-and-fire measurements over C channels.
inline int required_iftem_triggers(int K, int channels)
{
    return (2 * K + 1 + channels - 1) / channels + 1;
}

///
/// Sufficiency warnings for every channel of a machine. The integrate-and-fire
/// spacing condition is evaluated at the required trigger count.
///
inline std::vector<std::string> sufficiency_warnings(const ResolvedExperiment& ex,
                                                     const ResolvedMachine& machine,
                                                     const std::vector<Encoding>& enc)
{
    std::vector<std::string> out;
    const double ysup = sup_norm(ex.filtered);
    const int C       = static_cast<int>(machine.channels.size());
    const int K       = ex.signal.K();
    int total         = 0;
    for (std::size_t c = 0; c < machine.channels.size(); ++c)
    {
        const int L = static_cast<int>(enc[c].triggers.size());
        for (const auto& w : enc[c].warnings)
            out.push_back(w);
        if (const auto* cc = std::get_if<CtemConfig>(&machine.channels[c]))
        {
            total += L;
            const auto r = ctem_sufficiency(ysup, K, ex.signal.period(), *cc, L, C);
            if (!r.amplitude_ok || !r.frequency_ok)
                out.push_back("channel " + std::to_string(c) + ": crossing sufficiency conditions not met");
        }
        else
        {
            total += L - 1;
            const auto r = iftem_sufficiency(ysup, K, ex.signal.period(),
                                             std::get<IftemConfig>(machine.channels[c]),
                                             required_iftem_triggers(K, C), C);
            if (!r.spacing_ok)
                out.push_back("channel " + std::to_string(c) +
                              ": integrate-and-fire spacing condition not met");
        }
    }
    if (total < 2 * ex.kernel.M() + 1)
        out.push_back("fewer measurements than unknowns");
    return out;
}

/// Noise-free encodings of every machine, with machine identification on failure.
inline std::vector<std::vector<Encoding>> encode_all(const ResolvedExperiment& ex)
{
    std::vector<std::vector<Encoding>> out;
    for (const auto& m : ex.machines)
    {
        try
        {
            out.push_back(multichannel_encode(ex.filtered, m.channels));
        }
        catch (const Error& e)
        {
            throw MachineError(m.label, e.what());
        }
    }
    return out;
}

namespace detail
{

inline std::vector<TriggerSet> triggers_of(const std::vector<Encoding>& enc)
{
    std::vector<TriggerSet> t;
    for (const auto& e : enc)
        t.push_back(e.triggers);
    return t;
}

} // namespace detail

///
/// One record per machine from noise-free triggers. Sufficiency shortfalls
/// are attached as warnings and the run proceeds.
///
inline std::vector<TrialRecord> run_noise_free(const RunConfig& cfg)
{
    const ResolvedExperiment ex = resolve(cfg);
    const auto enc              = encode_all(ex);
    std::vector<TrialRecord> out;
    for (std::size_t i = 0; i < ex.machines.size(); ++i)
    {
        const auto start = std::chrono::steady_clock::now();
        TrialRecord rec  = reconstruct_machine(ex, ex.machines[i], detail::triggers_of(enc[i]), cfg.solver,
                                               0.0, 0, cfg.seed);
        rec.warnings     = sufficiency_warnings(ex, ex.machines[i], enc[i]);
        if (cfg.output.timing)
            rec.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        out.push_back(std::move(rec));
    }
    return out;
}

///
/// Monte Carlo jitter sweep. Trial t uses master seed + t for its solver and
/// jitter streams; the same jitter draws are rescaled for every sigma.
/// Records are ordered by (sigma, trial, machine) whatever the job count.
///
inline std::vector<TrialRecord> run_jitter_sweep(const RunConfig& cfg)
{
    const ResolvedExperiment ex = resolve(cfg);
    const auto enc              = encode_all(ex);
    const std::size_t S = cfg.noise.sigmas.size();
    const std::size_t R = static_cast<std::size_t>(cfg.noise.trials);
    const std::size_t Mn = ex.machines.size();
    std::vector<TrialRecord> out(S * R * Mn);

    auto work = [&](std::size_t idx) {
        const std::size_t s = idx / (R * Mn);
        const std::size_t r = (idx / Mn) % R;
        const std::size_t m = idx % Mn;
        const double sigma  = cfg.noise.sigmas[s];
        const int trial     = static_cast<int>(r);
        const auto start    = std::chrono::steady_clock::now();
        TrialRecord rec;
        try
        {
            std::vector<TriggerSet> trig;
            for (std::size_t c = 0; c < enc[m].size(); ++c)
                trig.push_back(add_jitter(enc[m][c].triggers, sigma, jitter_seed(cfg.seed, trial, m, c)));
            rec = reconstruct_machine(ex, ex.machines[m], trig, cfg.solver, sigma, trial,
                                      cfg.seed + static_cast<std::uint64_t>(trial));
        }
        catch (const Error& e)
        {
            rec.trial     = trial;
            rec.sigma     = sigma;
            rec.machine   = ex.machines[m].label;
            rec.converged = false;
            rec.nmse = rec.residual = rec.amplitude_error = std::numeric_limits<double>::quiet_NaN();
            rec.true_shifts = ex.signal.shifts();
            rec.true_amplitudes = ex.signal.amplitudes();
            rec.error     = e.what();
        }
        if (cfg.output.timing)
            rec.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        out[idx] = std::move(rec);
    };

    const std::size_t total = out.size();
    const int jobs = std::max(1, std::min<int>(cfg.jobs, static_cast<int>(total)));
    if (jobs == 1)
    {
        for (std::size_t i = 0; i < total; ++i)
            work(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < total; i = next++)
                work(i);
        });
    for (auto& th : pool)
        th.join();
    return out;
}

//------------------------------------------------------------------------------
// Summaries
//------------------------------------------------------------------------------

struct SummaryRow
{
    double sigma = 0.0;
    std::string machine;
    int trials   = 0;
    int failures = 0; ///< records without a finite NMSE
    double mean   = 0.0;
    double stddev = 0.0;
    double median = 0.0;
};

/// Mean, standard deviation and median of finite NMSE values per (sigma, machine).
inline std::vector<SummaryRow> summarize(const std::vector<TrialRecord>& records)
{
    std::vector<SummaryRow> rows;
    std::vector<std::vector<double>> values;
    for (const auto& r : records)
    {
        auto it = std::find_if(rows.begin(), rows.end(), [&](const SummaryRow& s) {
            return s.sigma == r.sigma && s.machine == r.machine;
        });
        std::size_t i;
        if (it == rows.end())
        {
            rows.push_back(SummaryRow{r.sigma, r.machine});
            values.emplace_back();
            i = rows.size() - 1;
        }
        else
        {
            i = static_cast<std::size_t>(it - rows.begin());
        }
        ++rows[i].trials;
        if (std::isfinite(r.nmse))
            values[i].push_back(r.nmse);
        else
            ++rows[i].failures;
    }
    for (std::size_t i = 0; i < rows.size(); ++i)
    {
        auto& v = values[i];
        if (v.empty())
        {
            rows[i].mean = rows[i].stddev = rows[i].median = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        const double n    = static_cast<double>(v.size());
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
        double ss         = 0.0;
        for (double x : v)
            ss += (x - mean) * (x - mean);
        std::sort(v.begin(), v.end());
        rows[i].mean   = mean;
        rows[i].stddev = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
        rows[i].median = v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
    }
    return rows;
}

//------------------------------------------------------------------------------
// Output
//------------------------------------------------------------------------------

namespace detail
{

inline std::string fmt_double(double x)
{
    if (std::isnan(x))
        return "nan";
    if (std::isinf(x))
        return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline double parse_double(const std::string& s)
{
    if (s == "nan")
        return std::numeric_limits<double>::quiet_NaN();
    std::size_t pos = 0;
    const double v  = std::stod(s, &pos);
    if (pos != s.size())
        throw ArgumentError("malformed number '" + s + "'");
    return v;
}

inline Json double_json(double x)
{
    return std::isfinite(x) ? Json(x) : Json(nullptr);
}

inline double json_double(const Json& j)
{
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

} // namespace detail

inline constexpr const char* results_csv_header = "trial,sigma,machine,nmse,residual,converged,runtime_ms";

inline void write_results_csv(std::ostream& os, const std::vector<TrialRecord>& records)
{
    os << results_csv_header << '\n';
    for (const auto& r : records)
        os << r.trial << ',' << detail::fmt_double(r.sigma) << ',' << r.machine << ','
           << detail::fmt_double(r.nmse) << ',' << detail::fmt_double(r.residual) << ','
           << (r.converged ? 1 : 0) << ',' << detail::fmt_double(r.runtime_ms) << '\n';
}

/// Reads the CSV columns back; fields not present in the table keep defaults.
inline std::vector<TrialRecord> read_results_csv(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line) || line != results_csv_header)
        throw ArgumentError("results CSV has an unexpected header");
    std::vector<TrialRecord> out;
    while (std::getline(is, line))
    {
        if (line.empty())
            continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            f.push_back(cell);
        if (f.size() != 7)
            throw ArgumentError("results CSV row has " + std::to_string(f.size()) + " fields: " + line);
        TrialRecord r;
        r.trial      = std::stoi(f[0]);
        r.sigma      = detail::parse_double(f[1]);
        r.machine    = f[2];
        r.nmse       = detail::parse_double(f[3]);
        r.residual   = detail::parse_double(f[4]);
        r.converged  = f[5] == "1";
        r.runtime_ms = detail::parse_double(f[6]);
        out.push_back(std::move(r));
    }
    return out;
}

inline Json record_to_json(const TrialRecord& r)
{
    Json pairs = Json::array();
    for (std::size_t k = 0; k < r.true_shifts.size(); ++k)
        pairs.push_back({detail::double_json(r.true_shifts[k]),
                         k < r.est_shifts.size() ? detail::double_json(r.est_shifts[k]) : Json(nullptr)});
    Json est_shifts = Json::array();
    for (double x : r.est_shifts)
        est_shifts.push_back(detail::double_json(x));
    Json est_amps = Json::array();
    for (double x : r.est_amplitudes)
        est_amps.push_back(detail::double_json(x));
    return Json{{"trial", r.trial},
                {"sigma", r.sigma},
                {"machine", r.machine},
                {"nmse", detail::double_json(r.nmse)},
                {"amplitude_error", detail::double_json(r.amplitude_error)},
                {"residual", detail::double_json(r.residual)},
                {"converged", r.converged},
                {"iterations", r.iterations},
                {"restarts", r.restarts},
                {"true_shifts", r.true_shifts},
                {"est_shifts", est_shifts},
                {"true_amplitudes", r.true_amplitudes},
                {"est_amplitudes", est_amps},
                {"shift_pairs", pairs},
                {"triggers", r.triggers},
                {"deficits", r.deficits},
                {"warnings", r.warnings},
                {"error", r.error},
                {"runtime_ms", r.runtime_ms}};
}

inline Json reconstruction_to_json(const ReconstructionResult& r)
{
    Json shifts = Json::array(), amps = Json::array();
    for (double t : r.shifts)
        shifts.push_back(detail::double_json(t));
    for (double c : r.amplitudes)
        amps.push_back(detail::double_json(c));
    return Json{{"shifts", shifts},
                {"amplitudes", amps},
                {"residual", detail::double_json(r.residual)},
                {"iterations", r.iterations_used},
                {"restarts", r.restarts_used},
                {"converged", r.converged}};
}

inline TrialRecord record_from_json(const Json& j)
{
    auto dvec = [](const Json& a) {
        std::vector<double> v;
        for (const auto& x : a)
            v.push_back(detail::json_double(x));
        return v;
    };
    TrialRecord r;
    r.trial           = j.at("trial").get<int>();
    r.sigma           = j.at("sigma").get<double>();
    r.machine         = j.at("machine").get<std::string>();
    r.nmse            = detail::json_double(j.at("nmse"));
    r.amplitude_error = detail::json_double(j.at("amplitude_error"));
    r.residual        = detail::json_double(j.at("residual"));
    r.converged       = j.at("converged").get<bool>();
    r.iterations      = j.at("iterations").get<int>();
    r.restarts        = j.at("restarts").get<int>();
    r.true_shifts     = dvec(j.at("true_shifts"));
    r.est_shifts      = dvec(j.at("est_shifts"));
    r.true_amplitudes = dvec(j.at("true_amplitudes"));
    r.est_amplitudes  = dvec(j.at("est_amplitudes"));
    r.triggers        = j.at("triggers").get<std::vector<int>>();
    r.deficits        = j.at("deficits").get<std::vector<int>>();
    r.warnings        = j.at("warnings").get<std::vector<std::string>>();
    r.error           = j.at("error").get<std::string>();
    r.runtime_ms      = j.at("runtime_ms").get<double>();
    return r;
}

inline void write_results_json(std::ostream& os, const std::vector<TrialRecord>& records)
{
    Json arr = Json::array();
    for (const auto& r : records)
        arr.push_back(record_to_json(r));
    os << std::setw(2) << Json{{"records", arr}} << '\n';
}

inline std::vector<TrialRecord> read_results_json(std::istream& is)
{
    Json j;
    try
    {
        is >> j;
        std::vector<TrialRecord> out;
        for (const auto& r : j.at("records"))
            out.push_back(record_from_json(r));
        return out;
    }
    catch (const Json::exception& e)
    {
        throw ArgumentError(std::string("malformed results JSON: ") + e.what());
    }
}

inline void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows)
{
    os << "sigma,machine,trials,failures,mean_nmse,std_nmse,median_nmse\n";
    for (const auto& r : rows)
        os << detail::fmt_double(r.sigma) << ',' << r.machine << ',' << r.trials << ',' << r.failures << ','
           << detail::fmt_double(r.mean) << ',' << detail::fmt_double(r.stddev) << ','
           << detail::fmt_double(r.median) << '\n';
}

///
/// Sidecar metadata: the configuration as run, the resolved signal and
/// machine parameters, the configuration hash, master seed and version.
///
inline Json run_metadata(const RunConfig& cfg, const ResolvedExperiment& ex)
{
    const Json echo = run_config_to_json(cfg);
    Json machines   = Json::array();
    for (const auto& m : ex.machines)
    {
        Json ch = Json::array();
        for (const auto& c : m.channels)
            ch.push_back(detail::channel_to_json(ChannelSpec{c, false}));
        machines.push_back({{"label", m.label}, {"type", to_string(machine_kind(m.channels.front()))}, {"channels", ch}});
    }
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(detail::fnv1a(echo.dump())));
    return Json{{"config", echo},
                {"config_hash", hash},
                {"master_seed", cfg.seed},
                {"version", library_version},
                {"resolved",
                 {{"amplitudes", ex.signal.amplitudes()},
                  {"shifts", ex.signal.shifts()},
                  {"M", ex.kernel.M()},
                  {"kernel_gain", ex.kernel.gains()[0].real()},
                  {"filtered_peak", sup_norm(ex.filtered)},
                  {"machines", machines}}}};
}

///
/// Writes records in the chosen format plus `<path>.meta.json`. IO failures
/// carry the offending path.
///
inline void emit_results(const std::vector<TrialRecord>& records, const std::string& path,
                         const std::string& format, const Json& metadata = Json())
{
    if (format != "csv" && format != "json")
        throw ArgumentError("format must be csv or json");
    std::ofstream os(path);
    if (!os)
        throw IoError("cannot open '" + path + "' for writing");
    if (format == "csv")
        write_results_csv(os, records);
    else
        write_results_json(os, records);
    if (!os)
        throw IoError("write to '" + path + "' failed");

    if (!metadata.is_null())
    {
        const std::string meta = path + ".meta.json";
        std::ofstream ms(meta);
        if (!ms)
            throw IoError("cannot open '" + meta + "' for writing");
        ms << std::setw(2) << metadata << '\n';
        if (!ms)
            throw IoError("write to '" + meta + "' failed");
    }
}

} // namespace tempus_fri

#endif // TEMPUS_FRI_EXPERIMENTS_HPP
