// Acceptance suite: one PASS/FAIL line per criterion, detail lines indented.
// Exit status is nonzero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <random>
#include <string>
#include <thread>

#include <support/fixtures.hpp>
#include <support/oracles.hpp>

using namespace tempus_fri;

namespace
{

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void detail(const char* fmt, auto... args)
{
    std::printf("    ");
    std::printf(fmt, args...);
    std::printf("\n");
    std::fflush(stdout);
}

bool verdict(int id, const char* name, bool ok)
{
    std::printf("criterion %d (%s): %s\n", id, name, ok ? "PASS" : "FAIL");
    std::fflush(stdout);
    return ok;
}

std::vector<double> random_times(std::mt19937_64& rng, int L, double eps)
{
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    std::vector<double> t;
    while (static_cast<int>(t.size()) < L)
    {
        const double c = ud(rng);
        bool ok        = true;
        for (double s : t)
        {
            const double d = std::abs(c - s);
            ok             = ok && std::min(d, 1.0 - d) > eps;
        }
        if (ok)
            t.push_back(c);
    }
    std::sort(t.begin(), t.end());
    return t;
}

ComplexVector random_cvec(std::mt19937_64& rng, Eigen::Index n)
{
    std::normal_distribution<double> nd;
    ComplexVector v(n);
    for (auto& x : v)
        x = Complex(nd(rng), nd(rng));
    return v;
}

Encoding encode_channel(const FourierVector& y, const ChannelConfig& ch)
{
    if (const auto* c = std::get_if<CtemConfig>(&ch))
        return ctem_encode(y, *c);
    return iftem_encode(y, std::get<IftemConfig>(ch));
}

bool noise_free_ok(const std::vector<TrialRecord>& records, const char* signal)
{
    bool ok = true;
    for (const auto& r : records)
    {
        const bool good = r.nmse < 1e-12 && r.amplitude_error < 1e-8 && r.error.empty();
        detail("%s %-7s nmse=%.3g amplitude_error=%.3g %s", signal, r.machine.c_str(), r.nmse, r.amplitude_error,
               good ? "ok" : "BAD");
        ok = ok && good;
    }
    return ok;
}

bool criterion1()
{
    bool ok = true;
    for (const auto& [name, j] : {std::pair{"x1", fixture::x1()}, std::pair{"x2", fixture::x2()}})
    {
        const auto cfg = run_config_from_json(j);
        const auto t0  = Clock::now();
        const auto rec = run_noise_free(cfg);
        const double s = seconds_since(t0);
        ok             = noise_free_ok(rec, name) && ok;
        detail("%s both machines in %.3f s", name, s);
        ok = ok && s < 5.0;
    }
    return verdict(1, "noise-free single channel", ok);
}

bool criterion2()
{
    bool ok = true;
    for (const auto& [name, j] :
         {std::pair{"x1", fixture::x1_multichannel()}, std::pair{"x2", fixture::x2_multichannel()}})
    {
        const auto cfg = run_config_from_json(j);
        ok             = noise_free_ok(run_noise_free(cfg), name) && ok;

        const auto ex = resolve(cfg);
        const int N   = 2 * ex.kernel.M() + 1;
        for (const auto& m : ex.machines)
            for (std::size_t c = 0; c < m.channels.size(); ++c)
            {
                const auto enc   = encode_channel(ex.filtered, m.channels[c]);
                const auto sys   = make_system(enc.triggers, m.channels[c], ex.kernel.M());
                const int rows   = static_cast<int>(sys.rows());
                const int deficit = std::max(0, N - rows);
                detail("%s %s channel %zu alone: %d equations for %d unknowns, deficit %d %s", name, m.label.c_str(),
                       c, rows, N, deficit, deficit > 0 ? "ok" : "BAD (not underdetermined)");
                ok = ok && deficit > 0;
            }
    }
    return verdict(2, "multichannel recovery with underdetermined channels", ok);
}

bool criterion3()
{
    Json j             = fixture::x1();
    j["noise"]         = {{"sigmas", {1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0}}, {"trials", 100}};
    j["solver"]["eta"] = "auto";
    j["jobs"]          = std::max(1u, std::thread::hardware_concurrency());
    const auto cfg     = run_config_from_json(j);

    const auto t0      = Clock::now();
    const auto records = run_jitter_sweep(cfg);
    const double secs  = seconds_since(t0);
    const auto summary = summarize(records);

    bool ok = secs < 600.0;
    detail("sweep of %zu reconstructions in %.1f s", records.size(), secs);
    for (const auto& m : cfg.machines)
    {
        std::vector<double> means;
        for (const auto& row : summary)
            if (row.machine == m.label)
            {
                means.push_back(row.mean);
                detail("%-6s sigma=%-7g mean=%.3e median=%.3e std=%.3e failures=%d", m.label.c_str(), row.sigma,
                       row.mean, row.median, row.stddev, row.failures);
                if (row.sigma == 1e-3)
                {
                    const bool band = row.mean >= 1e-6 && row.mean <= 1e-4;
                    detail("%-6s mean at sigma=1e-3 %s [1e-6, 1e-4]", m.label.c_str(), band ? "inside" : "OUTSIDE");
                    ok = ok && band;
                }
            }
        int inversions = 0;
        for (std::size_t i = 1; i < means.size(); ++i)
            inversions += means[i] < means[i - 1];
        detail("%-6s adjacent inversions: %d", m.label.c_str(), inversions);
        ok = ok && inversions <= 1;
    }
    return verdict(3, "jitter robustness", ok);
}

bool criterion4()
{
    const double sigma = 1e-3;
    const int draws    = 100000;
    const auto ex      = fixture::resolve(fixture::x1());
    bool ok            = true;

    {
        const auto& cfg = std::get<IftemConfig>(ex.machines[1].channels[0]);
        const auto enc  = iftem_encode(ex.filtered, cfg);
        const auto n    = enc.measurements.values.size();
        std::vector<double> sum(n, 0.0), sq(n, 0.0);
        int used = 0;
        for (int d = 0; d < draws; ++d)
        {
            const auto jt = add_jitter(enc.triggers, sigma, detail::splitmix64(static_cast<std::uint64_t>(d)));
            if (jt.size() != enc.triggers.size())
                continue;
            const auto v = t_transform(jt, cfg).values;
            for (std::size_t i = 0; i < n; ++i)
            {
                const double e = v[i] - enc.measurements.values[i];
                sum[i] += e;
                sq[i] += e * e;
            }
            ++used;
        }
        const double want = 2.0 * cfg.bias * cfg.bias * sigma * sigma / 12.0;
        double worst      = 0.0;
        for (std::size_t i = 0; i < n; ++i)
        {
            const double mean = sum[i] / used;
            const double var  = sq[i] / used - mean * mean;
            worst             = std::max(worst, std::abs(var / want - 1.0));
        }
        detail("IF-TEM: %zu measurements, %d draws, worst relative variance error %.4f (limit 0.05)", n, used, worst);
        ok = ok && worst <= 0.05;
    }
    {
        const auto& cfg = std::get<CtemConfig>(ex.machines[0].channels[0]);
        const auto enc  = ctem_encode(ex.filtered, cfg);
        const auto n    = enc.triggers.size();
        std::vector<double> sum(n, 0.0), sq(n, 0.0);
        int used = 0;
        for (int d = 0; d < draws; ++d)
        {
            const auto jt = add_jitter(enc.triggers, sigma, detail::splitmix64(0x9e37ULL + d));
            if (jt.size() != n)
                continue;
            const auto v = ctem_measurements(jt, cfg).values;
            for (std::size_t i = 0; i < n; ++i)
            {
                const double e = v[i] - enc.measurements.values[i];
                sum[i] += e;
                sq[i] += e * e;
            }
            ++used;
        }
        const double bound = std::pow(two_pi * cfg.amplitude * cfg.frequency, 2) * sigma * sigma / 12.0;
        double worst       = 0.0;
        for (std::size_t i = 0; i < n; ++i)
        {
            const double mean = sum[i] / used;
            worst             = std::max(worst, (sq[i] / used - mean * mean) / bound);
        }
        detail("C-TEM: %zu measurements, largest variance / bound = %.4f (limit 1.05)", n, worst);
        ok = ok && worst <= 1.05;
    }
    return verdict(4, "noise statistics", ok);
}

bool criterion5()
{
    std::mt19937_64 rng(5);
    const int M    = 5, N = 2 * M + 1;
    const double eps = 0.1 / N;
    double worst_ct = 1.0, worst_if = 1.0;
    for (int d = 0; d < 100; ++d)
    {
        const RealVector sc =
            singular_values(build_gct(TriggerSet(random_times(rng, N, eps), 1.0, MachineKind::Crossing), M));
        const RealVector si =
            singular_values(build_gif(TriggerSet(random_times(rng, N + 1, eps), 1.0, MachineKind::IntegrateFire), M));
        worst_ct = std::min(worst_ct, sc.minCoeff() / sc.maxCoeff());
        worst_if = std::min(worst_if, si.minCoeff() / si.maxCoeff());
    }
    detail("N=%d, eps=%.4g: smallest sigma_min/sigma_max over 100 draws: G_CT %.3e, G_IF %.3e", N, eps, worst_ct,
           worst_if);
    return verdict(5, "full rank", worst_ct > 1e-10 && worst_if > 1e-10);
}

bool criterion6()
{
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    int ctem_bad = 0, iftem_bad = 0, first_bad = 0;
    for (int d = 0; d < 100; ++d)
    {
        const int K          = 1 + d % 6;
        const FriSignal sig  = random_dirac_signal(K, 1.0, 1000 + d);
        const double peak    = 0.1 + 0.8 * ud(rng);
        FourierVector y      = filtered_signal(sig, SamplingKernel(K, 1.0));
        y                    = FourierVector(K, y.coeffs() * (peak / sup_norm(y)), 1.0);
        const double ygrid   = sup_norm(y);
        const double yfine   = sup_norm(y, 1 << 20);

        const double fr = std::floor((2.0 * K + 1.0) * (1.0 + ud(rng)));
        const CtemConfig cc{ygrid * (1.0 + 0.5 * ud(rng)), fr, two_pi * ud(rng)};
        if (!(ctem_encode(y, cc).triggers.max_gap(true) < 1.0 / fr))
            ++ctem_bad;

        const IftemConfig ic{peak + 0.2 + ud(rng), 0.5 + ud(rng), 0.02 + 0.1 * ud(rng), 0.0};
        const auto t    = iftem_encode(y, ic).triggers.times();
        const double lo = ic.scale * ic.threshold / (ic.bias + yfine);
        const double hi = ic.scale * ic.threshold / (ic.bias - yfine);
        for (std::size_t n = 0; n + 1 < t.size(); ++n)
        {
            const double g = t[n + 1] - t[n];
            if (g < lo * (1.0 - 1e-12) || g > hi * (1.0 + 1e-12))
            {
                ++iftem_bad;
                break;
            }
        }
        if (t.front() > hi * (1.0 + 1e-12))
            ++first_bad;
    }
    detail("100 signals: C-TEM gap violations %d, IF-TEM spacing violations %d, first-trigger violations %d",
           ctem_bad, iftem_bad, first_bad);
    return verdict(6, "density bounds", ctem_bad == 0 && iftem_bad == 0 && first_bad == 0);
}

bool criterion7()
{
    std::mt19937_64 rng(7);
    double duality = 0.0;
    for (int d = 0; d < 100; ++d)
    {
        const int M           = 1 + d % 9;
        const int P           = d % (M + 1);
        const ComplexVector x = random_cvec(rng, 2 * M + 1);
        const ComplexVector u = random_cvec(rng, P + 1);
        const ComplexVector a = toeplitzify(FourierVector(M, x, 1.0), P).matrix * u;
        const ComplexVector b = right_dual(u, 2 * M + 1) * x;
        duality               = std::max(duality, (a - b).norm() / std::max(1.0, a.norm()));
    }

    double annihilation = 0.0;
    std::normal_distribution<double> nd;
    for (int K = 1; K <= 8; ++K)
        for (int d = 0; d < 10; ++d)
        {
            const auto tau = random_times(rng, K, 0.5 / (K + 1));
            std::vector<oracle::cd> roots;
            for (double t : tau)
                roots.push_back(std::exp(oracle::cd(0.0, -two_pi * t)));
            const auto h = oracle::expand_roots(roots);
            const int M  = K + d % 3;
            ComplexVector s(2 * M + 1);
            std::vector<double> c(K);
            for (auto& v : c)
                v = nd(rng);
            for (int m = -M; m <= M; ++m)
            {
                oracle::cd acc = 0.0;
                for (int k = 0; k < K; ++k)
                    acc += c[k] * std::pow(roots[k], m);
                s[m + M] = acc;
            }
            const ComplexVector hv = Eigen::Map<const ComplexVector>(h.data(), K + 1);
            annihilation = std::max(annihilation, (toeplitzify(FourierVector(M, s, 1.0), K).matrix * hv).norm() / s.norm());
        }

    double factor = 0.0;
    for (int d = 0; d < 100; ++d)
    {
        const int M = 1 + d % 8;
        const int L = 2 * M + 2 + d % 4;
        const TriggerSet t(random_times(rng, L, 1e-3), 1.0, MachineKind::IntegrateFire);
        ComplexMatrix Gt(L, 2 * M + 1);
        for (int n = 0; n < L; ++n)
            for (int m = -M; m <= M; ++m)
                Gt(n, m + M) = m == 0 ? oracle::cd(t.times()[n])
                                      : std::exp(oracle::cd(0.0, two_pi * m * t.times()[n])) / oracle::cd(0.0, two_pi * m);
        ComplexMatrix D = ComplexMatrix::Zero(L - 1, L);
        for (int n = 0; n + 1 < L; ++n)
        {
            D(n, n)     = -1.0;
            D(n, n + 1) = 1.0;
        }
        factor = std::max(factor, (build_gif(t, M) - D * Gt).cwiseAbs().maxCoeff());
    }
    detail("duality %.2e (limit 1e-13), annihilation %.2e (limit 1e-10), factorization %.2e (limit 1e-13)", duality,
           annihilation, factor);
    return verdict(7, "algebraic identities", duality <= 1e-13 && annihilation < 1e-10 && factor <= 1e-13);
}

bool criterion8()
{
    std::vector<std::pair<ResolvedExperiment, std::vector<ForwardSystem>>> cases;
    for (const auto& j : {fixture::x1(), fixture::x2(), fixture::x1_multichannel(), fixture::x2_multichannel()})
    {
        auto ex = fixture::resolve(j);
        std::vector<ForwardSystem> systems;
        for (const auto& m : ex.machines)
        {
            std::vector<ForwardSystem> parts;
            for (const auto& ch : m.channels)
                parts.push_back(make_system(encode_channel(ex.filtered, ch).triggers, ch, ex.kernel.M()));
            systems.push_back(stack_channels(parts));
        }
        cases.emplace_back(std::move(ex), std::move(systems));
    }

    int runs = 0, converged = 0;
    for (int seed = 0; seed < 100; ++seed)
    {
        const auto& [ex, systems] = cases[seed % cases.size()];
        const auto& sys           = systems[(seed / cases.size()) % systems.size()];
        GenFriOptions o;
        o.seed         = static_cast<std::uint64_t>(seed);
        const auto res = genfri_tem(sys, ex.signal.K(), o, ex.model);
        ++runs;
        converged += res.residual * res.residual <= 1e-10 * sys.measurements.squaredNorm();
    }

    std::mt19937_64 rng(8);
    int feasible = 0, quick = 0;
    for (int d = 0; d < 20; ++d)
    {
        const int K     = 1 + d % 5;
        const int M     = K + d % 3;
        const auto tau  = random_times(rng, K, 0.5 / (K + 1));
        const FriSignal sig(1.0, PulseDescriptor::dirac(), std::vector<double>(K, 1.0), tau);
        const auto x    = fourier_coefficients(sig, M);
        const TriggerSet t(random_times(rng, 2 * M + 3, 1e-2), 1.0, MachineKind::Crossing);
        const ComplexMatrix G = build_gct(t, M);
        const ForwardSystem sys{G, (G * x.coeffs()).real(), M, 1.0, Provenance::Ctem, {}};
        GenFriOptions o;
        o.seed         = static_cast<std::uint64_t>(d);
        const auto res = genfri_tem(sys, K, o);
        ++feasible;
        quick += res.converged && res.iterations_used <= 2 && res.restarts_used == 1;
    }
    detail("noise-free runs converged: %d / %d (need >= 95%%)", converged, runs);
    detail("feasible instances converged in <= 2 iterations: %d / %d", quick, feasible);
    return verdict(8, "solver sanity", converged * 100 >= 95 * runs && quick == feasible);
}

} // namespace

int main()
{
    bool ok = true;
    ok      = criterion1() && ok;
    ok      = criterion2() && ok;
    ok      = criterion3() && ok;
    ok      = criterion4() && ok;
    ok      = criterion5() && ok;
    ok      = criterion6() && ok;
    ok      = criterion7() && ok;
    ok      = criterion8() && ok;
    std::printf("acceptance: %s\n", ok ? "PASS" : "FAIL");
    return ok ? 0 : 1;
}
