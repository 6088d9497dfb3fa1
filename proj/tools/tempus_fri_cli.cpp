// Command-line front end: encode, reconstruct, noise-free, sweep, check.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include <tempus_fri/tempus_fri.hpp>

using namespace tempus_fri;

namespace
{

struct CommonOptions
{
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string format;
    int jobs     = 0;
    bool verbose = false;
    bool timing  = false;
};

void add_common(CLI::App* app, CommonOptions& o)
{
    app->add_option("--config", o.config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    app->add_option("--seed", o.seed, "master seed; overrides the configuration and TEMPUS_FRI_SEED");
    app->add_option("--out", o.out, "output path; defaults to the configuration's output.path");
    app->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    app->add_option("--jobs", o.jobs, "parallel trials")->check(CLI::PositiveNumber);
    app->add_flag("--verbose", o.verbose, "progress and summaries on stderr");
    app->add_flag("--timing", o.timing, "fill runtime_ms (outputs are then not byte-stable)");
}

RunConfig load(const CommonOptions& o)
{
    RunConfig cfg = load_run_config(o.config);
    if (o.seed)
        cfg.seed = *o.seed;
    else if (const char* env = std::getenv("TEMPUS_FRI_SEED"); env && *env)
    {
        try
        {
            cfg.seed = std::stoull(env);
        }
        catch (const std::exception&)
        {
            throw ConfigurationError(std::string("TEMPUS_FRI_SEED is not an unsigned integer: ") + env);
        }
    }
    if (!o.out.empty())
        cfg.output.path = o.out;
    if (!o.format.empty())
        cfg.output.format = o.format;
    if (o.jobs > 0)
        cfg.jobs = o.jobs;
    if (o.timing)
        cfg.output.timing = true;
    cfg.validate();
    return cfg;
}

void write_records(const RunConfig& cfg, const std::vector<TrialRecord>& records, const Json& meta)
{
    if (cfg.output.path.empty())
    {
        if (cfg.output.format == "csv")
            write_results_csv(std::cout, records);
        else
            write_results_json(std::cout, records);
        return;
    }
    emit_results(records, cfg.output.path, cfg.output.format, meta);
}

void report(const std::vector<TrialRecord>& records)
{
    for (const auto& r : records)
    {
        std::cerr << r.machine << " sigma=" << r.sigma << " trial=" << r.trial << " nmse=" << r.nmse
                  << " residual=" << r.residual << (r.converged ? "" : " (not converged)");
        if (!r.error.empty())
            std::cerr << " error: " << r.error;
        std::cerr << '\n';
        for (const auto& w : r.warnings)
            std::cerr << "  warning: " << w << '\n';
    }
}

std::ostream& open_out(const std::string& path, std::ofstream& file)
{
    if (path.empty())
        return std::cout;
    file.open(path);
    if (!file)
        throw IoError("cannot open '" + path + "' for writing");
    return file;
}

int cmd_encode(const CommonOptions& o, double sigma, int trial)
{
    const RunConfig cfg = load(o);
    const auto ex       = resolve(cfg);
    const auto enc      = encode_all(ex);
    std::ofstream file;
    std::ostream& os = open_out(o.out, file);
    os << "machine,channel,index,time,value\n" << std::setprecision(17);
    for (std::size_t m = 0; m < ex.machines.size(); ++m)
        for (std::size_t c = 0; c < enc[m].size(); ++c)
        {
            const TriggerSet t = add_jitter(enc[m][c].triggers, sigma, jitter_seed(cfg.seed, trial, m, c));
            const ChannelConfig& ch = ex.machines[m].channels[c];
            const auto meas = std::holds_alternative<CtemConfig>(ch) ? ctem_measurements(t, std::get<CtemConfig>(ch))
                                                                     : t_transform(t, std::get<IftemConfig>(ch));
            for (std::size_t n = 0; n < t.size(); ++n)
            {
                os << ex.machines[m].label << ',' << c << ',' << n << ',' << t.times()[n] << ',';
                if (n < meas.values.size())
                    os << meas.values[n];
                os << '\n';
            }
            if (o.verbose)
                std::cerr << ex.machines[m].label << '[' << c << "]: " << t.size() << " triggers\n";
        }
    return 0;
}

int cmd_reconstruct(const CommonOptions& o, const std::string& triggers_path)
{
    const RunConfig cfg = load(o);
    const auto ex       = resolve(cfg);
    std::ifstream is(triggers_path);
    if (!is)
        throw IoError("cannot open trigger file '" + triggers_path + "'");
    std::string line;
    if (!std::getline(is, line) || line.rfind("machine,channel,index,time", 0) != 0)
        throw ArgumentError("'" + triggers_path + "' is not an encode output");
    std::map<std::string, std::map<std::size_t, std::vector<double>>> times;
    while (std::getline(is, line))
    {
        if (line.empty())
            continue;
        std::stringstream ss(line);
        std::string label, channel, index, time;
        if (!std::getline(ss, label, ',') || !std::getline(ss, channel, ',') || !std::getline(ss, index, ',') ||
            !std::getline(ss, time, ','))
            throw ArgumentError("malformed trigger row in '" + triggers_path + "': " + line);
        times[label][std::stoul(channel)].push_back(std::stod(time));
    }

    std::vector<TrialRecord> records;
    for (const auto& m : ex.machines)
    {
        auto it = times.find(m.label);
        if (it == times.end())
            throw ConfigurationError("trigger file has no rows for machine '" + m.label + "'");
        std::vector<TriggerSet> sets;
        for (std::size_t c = 0; c < m.channels.size(); ++c)
        {
            auto ct = it->second.find(c);
            if (ct == it->second.end())
                throw ConfigurationError("trigger file lacks channel " + std::to_string(c) + " of '" + m.label + "'");
            sets.emplace_back(ct->second, ex.signal.period(), machine_kind(m.channels[c]));
        }
        records.push_back(reconstruct_machine(ex, m, sets, cfg.solver, 0.0, 0, cfg.seed));
    }
    if (o.verbose)
        report(records);
    write_records(cfg, records, run_metadata(cfg, ex));
    return 0;
}

int cmd_noise_free(const CommonOptions& o)
{
    const RunConfig cfg = load(o);
    const auto records  = run_noise_free(cfg);
    if (o.verbose)
        report(records);
    write_records(cfg, records, run_metadata(cfg, resolve(cfg)));
    return 0;
}

int cmd_sweep(const CommonOptions& o)
{
    const RunConfig cfg = load(o);
    const auto records  = run_jitter_sweep(cfg);
    const auto summary  = summarize(records);
    write_records(cfg, records, run_metadata(cfg, resolve(cfg)));
    if (!cfg.output.path.empty())
    {
        const std::string path = cfg.output.path + ".summary.csv";
        std::ofstream os(path);
        if (!os)
            throw IoError("cannot open '" + path + "' for writing");
        write_summary_csv(os, summary);
    }
    if (o.verbose || !cfg.output.path.empty())
        write_summary_csv(std::cerr, summary);
    return 0;
}

int cmd_check(const CommonOptions& o)
{
    const RunConfig cfg = load(o);
    const auto ex       = resolve(cfg);
    const double ysup   = sup_norm(ex.filtered);
    Json report         = Json::array();
    for (const auto& m : ex.machines)
    {
        const int C = static_cast<int>(m.channels.size());
        for (std::size_t c = 0; c < m.channels.size(); ++c)
        {
            Json row{{"machine", m.label}, {"channel", c}, {"signal_sup", ysup}};
            try
            {
                if (const auto* cc = std::get_if<CtemConfig>(&m.channels[c]))
                {
                    const auto enc = ctem_encode(ex.filtered, *cc);
                    const auto r   = ctem_sufficiency(ysup, ex.signal.K(), ex.signal.period(), *cc,
                                                      static_cast<int>(enc.triggers.size()), C);
                    row.update({{"type", "ctem"}, {"triggers", r.triggers}, {"min_frequency", r.min_frequency},
                                {"enough_triggers", r.enough_triggers}, {"amplitude_ok", r.amplitude_ok},
                                {"frequency_ok", r.frequency_ok}, {"sufficient", r.sufficient()}});
                }
                else
                {
                    const auto& ic = std::get<IftemConfig>(m.channels[c]);
                    const auto enc = iftem_encode(ex.filtered, ic);
                    const int L_req = required_iftem_triggers(ex.signal.K(), C);
                    const auto r    = iftem_sufficiency(ysup, ex.signal.K(), ex.signal.period(), ic, L_req, C);
                    row.update({{"type", "iftem"}, {"triggers", enc.triggers.size()}, {"required_triggers", L_req},
                                {"lhs", r.lhs}, {"rhs", r.rhs},
                                {"spacing_ok", r.spacing_ok}, {"enough_measurements", r.enough_measurements},
                                {"sufficient", r.sufficient()}});
                }
            }
            catch (const Error& e)
            {
                row.update({{"sufficient", false}, {"error", e.what()}});
            }
            report.push_back(std::move(row));
        }
    }

    std::ofstream file;
    std::ostream& os = open_out(o.out, file);
    if (cfg.output.format == "json")
    {
        os << std::setw(2) << report << '\n';
    }
    else
    {
        os << "machine,channel,type,triggers,sufficient\n";
        for (const auto& r : report)
            os << r["machine"].get<std::string>() << ',' << r["channel"].get<std::size_t>() << ','
               << r.value("type", "") << ',' << r.value("triggers", 0) << ',' << (r["sufficient"].get<bool>() ? 1 : 0)
               << '\n';
    }
    if (o.verbose)
        std::cerr << std::setw(2) << report << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Time encoding and reconstruction of finite-rate-of-innovation signals"};
    app.require_subcommand(1);

    CommonOptions encode_o, recon_o, nf_o, sweep_o, check_o;
    double sigma = 0.0;
    int trial    = 0;
    std::string triggers_path;

    auto* encode = app.add_subcommand("encode", "write trigger times and measurements of every channel");
    add_common(encode, encode_o);
    encode->add_option("--sigma", sigma, "jitter applied to the written times")->check(CLI::NonNegativeNumber);
    encode->add_option("--trial", trial, "trial index selecting the jitter stream")->check(CLI::NonNegativeNumber);

    auto* recon = app.add_subcommand("reconstruct", "recover the signal from an encode output");
    add_common(recon, recon_o);
    recon->add_option("--triggers", triggers_path, "CSV written by encode")->required()->check(CLI::ExistingFile);

    auto* nf = app.add_subcommand("noise-free", "noise-free recovery for every machine");
    add_common(nf, nf_o);
    auto* sweep = app.add_subcommand("sweep", "Monte Carlo jitter sweep");
    add_common(sweep, sweep_o);
    auto* check = app.add_subcommand("check", "sufficiency report");
    add_common(check, check_o);

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (*encode)
            return cmd_encode(encode_o, sigma, trial);
        if (*recon)
            return cmd_reconstruct(recon_o, triggers_path);
        if (*nf)
            return cmd_noise_free(nf_o);
        if (*sweep)
            return cmd_sweep(sweep_o);
        return cmd_check(check_o);
    }
    catch (const Error& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
