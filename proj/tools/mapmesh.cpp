// mapmesh: ingest maps, inspect graphs, build routing tables and run
// simulations from the command line.

#include <mapmesh/mapmesh.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace mapmesh;

namespace {

constexpr const char* kVersion = "0.1.0";

/// Bad input from the operator: exit status 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Provenance = std::vector<std::pair<std::string, std::string>>;

void write_provenance(std::ostream& os, const std::string& command, const Provenance& p)
{
    os << "# tool=mapmesh " << kVersion << '\n' << "# command=" << command << '\n';
    for (const auto& [k, v] : p) os << "# " << k << '=' << v << '\n';
}

Provenance scenario_provenance(const SimScenario& s)
{
    Provenance p;
    std::istringstream in(serialize_scenario(s));
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find(" = ");
        p.emplace_back(line.substr(0, eq), line.substr(eq + 3));
    }
    return p;
}

/// Output sink: a file when a path is given, stdout otherwise.
class Sink {
public:
    explicit Sink(const std::string& path)
    {
        if (path.empty() || path == "-") return;
        file_.open(path, std::ios::binary);
        if (!file_) throw UsageError("cannot write '" + path + "'");
    }
    std::ostream& os() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

private:
    std::ofstream file_;
};

void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::string read_text(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open config '" + path + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<double> parse_range_spec(const std::string& spec)
{
    std::vector<double> parts;
    std::stringstream in(spec);
    std::string tok;
    while (std::getline(in, tok, ':')) {
        try {
            std::size_t used = 0;
            parts.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw UsageError("--ranges expects start:stop:step in meters, got '" + spec + "'");
        }
    }
    if (parts.size() != 3 || !(parts[2] > 0) || parts[1] < parts[0] || parts[0] <= 0) {
        throw UsageError("--ranges expects start:stop:step with 0 < start <= stop and step > 0, got '" + spec + "'");
    }
    std::vector<double> out;
    const auto n = static_cast<long>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
    for (long i = 0; i <= n; ++i) out.push_back(parts[0] + static_cast<double>(i) * parts[2]);
    return out;
}

/// Settings shared by every subcommand that touches a map or a scenario.
/// Unset flags leave config-file values alone.
struct Common {
    std::string map;
    std::string config;
    std::string projection = "none";
    std::string out;
    std::string format = "csv";
    unsigned threads = 0;
    std::optional<double> range, width, k, ell, density, cell_target, location_error;
    std::optional<std::size_t> pairs;
    std::optional<std::uint64_t> seed, table_seed;
    std::optional<std::string> scheme;
    std::optional<bool> suppression;

    void add_map(CLI::App* c, bool required = true)
    {
        auto* o = c->add_option("--map", map, "building map (GeoJSON or native .mmap cache)");
        if (required) o->required();
        c->add_option("--projection", projection, "coordinate handling for GeoJSON input")
            ->check(CLI::IsMember({"none", "equirectangular"}));
    }
    void add_out(CLI::App* c, const std::string& what)
    {
        c->add_option("-o,--out", out, what + " (default stdout)");
    }
    void add_world(CLI::App* c)
    {
        c->add_option("--range", range, "building-graph range in meters (default 100)");
        c->add_option("--cell-target", cell_target, "grid cell target side in meters (default 100)");
        c->add_option("--k", k, "path exponent; inf selects the MST (default 10)")
            ->transform([](std::string v) { return v == "mst" ? std::string("inf") : v; });
        c->add_option("--width", width, "conduit width W in meters (default 150)");
        c->add_option("--table-seed", table_seed, "seed for cell representatives (default 0)");
        c->add_option("--threads", threads, "worker cap, 0 for all cores");
    }
    void add_scenario(CLI::App* c)
    {
        c->add_option("--config", config, "scenario file of key = value lines; flags override it");
        add_world(c);
        c->add_option("--ell", ell, "maximum stochastic link loss in [0, 1]");
        c->add_option("--density", density, "square meters of floor area per device (default 200)");
        c->add_option("--pairs", pairs, "source-destination pairs per run (default 100)");
        c->add_option("--location-error", location_error, "GPSR position error bound in meters");
        c->add_option("--scheme", scheme, "mapmesh or gpsr")->check(CLI::IsMember({"mapmesh", "gpsr"}));
        c->add_option("--suppression", suppression, "MapMesh suppression timers (true/false)");
        c->add_option("--format", format, "metrics output format")->check(CLI::IsMember({"csv", "json"}));
    }

    LoadOptions load_options() const
    {
        LoadOptions o;
        o.projection = projection == "equirectangular" ? Projection::equirectangular : Projection::none;
        return o;
    }

    BuildingMap load() const
    {
        if (map.empty()) throw UsageError("no map given; pass --map or set 'map' in the config");
        return load_map_file(map, load_options());
    }

    SimScenario scenario()
    {
        SimScenario s;
        if (!config.empty()) s = parse_scenario(read_text(config));
        if (map.empty()) {
            map = s.map_path;
        } else {
            s.map_path = map;
        }
        if (range) s.range_m = *range;
        if (cell_target) s.cell_target_m = *cell_target;
        if (k) s.k = std::isinf(*k) ? kInfiniteExponent : *k;
        if (width) s.protocol.conduit_width = *width;
        if (table_seed) s.table_seed = *table_seed;
        if (ell) s.loss.ell = *ell;
        if (density) s.density_m2 = *density;
        if (pairs) s.pairs = *pairs;
        if (seed) s.seed = *seed;
        if (location_error) s.location_error_m = *location_error;
        if (scheme) s.scheme = *scheme == "gpsr" ? Scheme::gpsr : Scheme::mapmesh;
        if (suppression) s.protocol.suppression = *suppression;
        return s;
    }

    WorldParams world(unsigned worker_cap) const
    {
        WorldParams p;
        if (range) p.range_m = *range;
        if (cell_target) p.cell_target_m = *cell_target;
        if (k) p.k = std::isinf(*k) ? kInfiniteExponent : *k;
        if (width) p.conduit_width_m = *width;
        if (table_seed) p.table_seed = *table_seed;
        p.threads = worker_cap;
        return p;
    }
};

void emit_metrics(std::ostream& os, const std::string& format, const std::string& command, const Provenance& prov,
                  std::span<const SimScenario> scenarios, std::span<const SimMetrics> metrics)
{
    if (format == "json") {
        nlohmann::ordered_json j;
        j["tool"] = std::string("mapmesh ") + kVersion;
        j["command"] = command;
        for (const auto& [k, v] : prov) j["provenance"][k] = v;
        j["rows"] = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < metrics.size(); ++i) {
            const auto& s = scenarios[i];
            const auto& m = metrics[i];
            j["rows"].push_back({{"scenario", s.name},
                                 {"scheme", m.scheme},
                                 {"ell", s.loss.ell},
                                 {"W", s.protocol.conduit_width},
                                 {"k", format_number(s.k)},
                                 {"seed", s.seed},
                                 {"delivery_rate", m.delivery_rate()},
                                 {"transmissions", m.transmissions},
                                 {"mean_hops", m.mean_hops()},
                                 {"mean_latency_ms", m.mean_latency_ms()}});
        }
        os << j.dump(2) << '\n';
        return;
    }
    write_provenance(os, command, prov);
    write_metrics_csv_header(os);
    for (std::size_t i = 0; i < metrics.size(); ++i) write_metrics_csv_row(os, scenarios[i], metrics[i]);
}

int cmd_ingest(Common& c, const std::string& geojson_out)
{
    const auto map = c.load();
    if (c.out.empty()) throw UsageError("ingest needs --out for the native cache");
    write_bytes(c.out, serialize_map(map));
    if (!geojson_out.empty()) {
        Sink s(geojson_out);
        s.os() << to_geojson(map) << '\n';
    }
    std::cerr << "ingested " << map.size() << " buildings into " << c.out << '\n';
    return 0;
}

int cmd_graph(Common& c)
{
    const auto map = c.load();
    const double range = c.range.value_or(kDefaultRangeM);
    const auto g = build_graph(map, range);
    Sink s(c.out);
    write_provenance(s.os(), "graph", {{"map", c.map}, {"range", format_number(range)}, {"buildings", std::to_string(map.size())}});
    write_edges_csv(s.os(), g);
    return 0;
}

int cmd_feasibility(Common& c, const std::string& ranges_spec)
{
    const auto ranges = parse_range_spec(ranges_spec);
    const auto map = c.load();
    const double density = c.density.value_or(kDefaultDensityM2);
    const auto rows = feasibility_sweep(map, ranges, density);
    Sink s(c.out);
    write_provenance(s.os(), "feasibility",
                     {{"map", c.map}, {"ranges", ranges_spec}, {"density", format_number(density)}});
    write_feasibility_csv(s.os(), rows);
    return 0;
}

int cmd_tables(Common& c, const std::string& dir, bool csv)
{
    if (dir.empty()) throw UsageError("tables needs --out-dir");
    const auto map = c.load();
    const WorldParams p = c.world(c.threads);
    const auto g = build_graph(map, p.range_m);
    const auto grid = build_grid(map, p.cell_target_m);
    const auto full = precompute_tables(map, g, grid, {p.k, p.conduit_width_m, p.table_seed, p.threads});
    const auto tables = compress_tables(full.tables, grid, p.threads);

    fs::create_directories(dir);
    for (const auto& t : tables) write_bytes(fs::path(dir) / ("building-" + std::to_string(t.owner) + ".mmrt"), serialize_table(t));

    std::size_t max_full = 0, max_small = 0, sum_small = 0;
    for (const auto& t : full.tables) max_full = std::max(max_full, t.size());
    for (const auto& t : tables) {
        max_small = std::max(max_small, t.size());
        sum_small += t.size();
    }
    const Provenance prov{{"map", c.map},
                          {"range", format_number(p.range_m)},
                          {"cell_target", format_number(p.cell_target_m)},
                          {"k", format_number(p.k)},
                          {"conduit_width", format_number(p.conduit_width_m)},
                          {"table_seed", std::to_string(p.table_seed)},
                          {"buildings", std::to_string(map.size())},
                          {"cells", std::to_string(full.stats.cells)},
                          {"path_computations", std::to_string(full.stats.path_computations)},
                          {"max_uncompressed_entries", std::to_string(max_full)},
                          {"max_entries", std::to_string(max_small)}};
    {
        std::ofstream h(fs::path(dir) / "histogram.csv", std::ios::binary);
        if (!h) throw UsageError("cannot write histogram in '" + dir + "'");
        write_provenance(h, "tables", prov);
        write_size_histogram_csv(h, tables);
    }
    if (csv) {
        std::ofstream t(fs::path(dir) / "tables.csv", std::ios::binary);
        write_provenance(t, "tables", prov);
        write_tables_csv(t, tables);
    }
    Sink s(c.out);
    s.os() << "buildings=" << map.size() << " cells=" << full.stats.cells << " max_entries=" << max_small
           << " mean_entries=" << format_number(map.empty() ? 0.0 : static_cast<double>(sum_small) / map.size())
           << " max_uncompressed=" << max_full << '\n';
    return 0;
}

int cmd_simulate(Common& c, const std::string& trace_path)
{
    const SimScenario s = c.scenario();
    const World w = build_world(c.load(), world_params_for(s, c.threads), s.scheme == Scheme::mapmesh);
    std::vector<TraceRecord> trace;
    const auto m = run_scenario(w, s, trace_path.empty() ? nullptr : &trace);
    if (!trace_path.empty()) {
        Sink t(trace_path);
        write_trace_csv(t.os(), trace);
    }
    Sink out(c.out);
    const std::vector<SimScenario> ss{s};
    const std::vector<SimMetrics> ms{m};
    emit_metrics(out.os(), c.format, "simulate", scenario_provenance(s), ss, ms);
    return 0;
}

std::vector<std::uint64_t> seed_list(std::size_t seeds, std::optional<std::uint64_t> first)
{
    if (seeds == 0) throw UsageError("--seeds must be at least 1");
    std::vector<std::uint64_t> out;
    for (std::size_t i = 0; i < seeds; ++i) out.push_back(first.value_or(1) + i);
    return out;
}

/// Scenarios grouped by the world (k, W) their tables need.
std::vector<SimMetrics> run_grouped(Common& c, const BuildingMap& map, std::span<const SimScenario> scenarios)
{
    std::map<std::pair<double, double>, std::vector<std::size_t>> groups;
    bool any_mapmesh = false;
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
        groups[{scenarios[i].k, scenarios[i].protocol.conduit_width}].push_back(i);
        any_mapmesh = any_mapmesh || scenarios[i].scheme == Scheme::mapmesh;
    }
    std::vector<SimMetrics> out(scenarios.size());
    for (const auto& [key, idx] : groups) {
        const World w = build_world(map, world_params_for(scenarios[idx.front()], c.threads), any_mapmesh);
        std::vector<SimScenario> batch;
        for (std::size_t i : idx) batch.push_back(scenarios[i]);
        const auto ms = run_many(w, batch, c.threads);
        for (std::size_t j = 0; j < idx.size(); ++j) out[idx[j]] = ms[j];
    }
    return out;
}

template <typename T>
std::string join(const std::vector<T>& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ';';
        if constexpr (std::is_arithmetic_v<T>) {
            s += format_number(static_cast<double>(v[i]));
        } else {
            s += v[i];
        }
    }
    return s;
}

int cmd_sweep(Common& c, std::vector<double> ells, std::vector<double> widths, std::vector<std::string> ks,
              std::vector<std::string> schemes, std::size_t seeds)
{
    const SimScenario base = c.scenario();
    const auto map = c.load();
    if (ells.empty()) ells = {base.loss.ell};
    if (widths.empty()) widths = {base.protocol.conduit_width};
    std::vector<double> kv;
    for (const auto& k : ks) kv.push_back(parse_double_value("k", k));
    if (kv.empty()) kv = {base.k};
    if (schemes.empty()) schemes = {"mapmesh"};
    std::vector<SimScenario> scenarios;
    for (const auto& scheme : schemes) {
        for (double e : ells) {
            for (double wd : widths) {
                for (double k : kv) {
                    for (auto seed : seed_list(seeds, c.seed)) {
                        SimScenario s = base;
                        s.loss.ell = e;
                        s.protocol.conduit_width = wd;
                        s.k = k;
                        s.seed = seed;
                        if (scheme == "gpsr" || scheme == "gpsr-15") {
                            s.scheme = Scheme::gpsr;
                            s.location_error_m = scheme == "gpsr-15" ? 15.0 : 0.0;
                        } else {
                            s.scheme = Scheme::mapmesh;
                            s.protocol.suppression = scheme != "mapmesh-flood";
                        }
                        s.name = scheme + "-ell" + format_number(e) + "-W" + format_number(wd) + "-k" + format_number(k);
                        scenarios.push_back(s);
                    }
                }
            }
        }
    }
    const auto metrics = run_grouped(c, map, scenarios);
    auto prov = scenario_provenance(base);
    prov.emplace_back("sweep_ell", join(ells));
    prov.emplace_back("sweep_conduit_width", join(widths));
    prov.emplace_back("sweep_k", join(kv));
    prov.emplace_back("sweep_schemes", join(schemes));
    prov.emplace_back("seeds", std::to_string(seeds));
    Sink out(c.out);
    emit_metrics(out.os(), c.format, "sweep", prov, scenarios, metrics);
    return 0;
}

int cmd_compare(Common& c, std::size_t seeds)
{
    const SimScenario base = c.scenario();
    const auto map = c.load();
    const std::vector<std::string> labels{"mapmesh", "gpsr", "gpsr15"};
    std::vector<SimScenario> scenarios;
    const auto seed_values = seed_list(seeds, c.seed);
    for (auto seed : seed_values) {
        for (const auto& l : labels) {
            SimScenario s = base;
            s.seed = seed;
            s.scheme = l == "mapmesh" ? Scheme::mapmesh : Scheme::gpsr;
            s.location_error_m = l == "gpsr15" ? 15.0 : 0.0;
            s.name = l;
            scenarios.push_back(s);
        }
    }
    const auto metrics = run_grouped(c, map, scenarios);
    auto prov = scenario_provenance(base);
    prov.emplace_back("seeds", std::to_string(seeds));
    Sink out(c.out);
    auto& os = out.os();
    if (c.format == "json") {
        emit_metrics(os, c.format, "compare", prov, scenarios, metrics);
        return 0;
    }
    write_provenance(os, "compare", prov);
    os << "seed,ell";
    for (const auto& l : labels) os << ',' << l << "_delivery";
    for (const auto& l : labels) os << ',' << l << "_transmissions";
    os << '\n';
    std::vector<double> dsum(labels.size(), 0.0), tsum(labels.size(), 0.0);
    for (std::size_t r = 0; r < seed_values.size(); ++r) {
        os << seed_values[r] << ',' << format_number(base.loss.ell);
        for (std::size_t j = 0; j < labels.size(); ++j) {
            const double d = metrics[r * labels.size() + j].delivery_rate();
            dsum[j] += d;
            os << ',' << format_number(d);
        }
        for (std::size_t j = 0; j < labels.size(); ++j) {
            const auto t = metrics[r * labels.size() + j].transmissions;
            tsum[j] += static_cast<double>(t);
            os << ',' << t;
        }
        os << '\n';
    }
    const double n = static_cast<double>(seed_values.size());
    os << "mean," << format_number(base.loss.ell);
    for (double d : dsum) os << ',' << format_number(d / n);
    for (double t : tsum) os << ',' << format_number(t / n);
    os << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"MapMesh: building-map routing for city-scale access-point meshes"};
    app.set_version_flag("--version", std::string("mapmesh ") + kVersion);
    app.require_subcommand(1);
    Common c;

    auto* ingest = app.add_subcommand("ingest", "validate a map and write the native cache");
    c.add_map(ingest);
    c.add_out(ingest, "native .mmap cache path");
    std::string geojson_out;
    ingest->add_option("--geojson", geojson_out, "also write the normalized map as GeoJSON");

    auto* graph = app.add_subcommand("graph", "write the building graph as an edge-list CSV");
    c.add_map(graph);
    c.add_out(graph, "edge CSV path");
    graph->add_option("--range", c.range, "building-graph range in meters (default 100)");

    auto* feas = app.add_subcommand("feasibility", "connectivity against radio range");
    c.add_map(feas);
    c.add_out(feas, "feasibility CSV path");
    std::string ranges = "20:200:10";
    feas->add_option("--ranges", ranges, "start:stop:step in meters")->capture_default_str();
    feas->add_option("--density", c.density, "square meters of floor area per device (default 200)");

    auto* tables = app.add_subcommand("tables", "build compressed per-building routing tables");
    c.add_map(tables);
    c.add_world(tables);
    c.add_out(tables, "summary line");
    std::string out_dir;
    bool tables_csv = false;
    tables->add_option("--out-dir", out_dir, "directory for MMRT files and histogram.csv")->required();
    tables->add_flag("--csv", tables_csv, "also write tables.csv");

    auto* simulate = app.add_subcommand("simulate", "run one scenario");
    c.add_map(simulate, false);
    c.add_scenario(simulate);
    c.add_out(simulate, "metrics path");
    simulate->add_option("--seed", c.seed, "scenario seed (default 1)");
    std::string trace_path;
    simulate->add_option("--trace", trace_path, "per-packet trace CSV path");

    auto* sweep = app.add_subcommand("sweep", "run a parameter grid");
    c.add_map(sweep, false);
    c.add_scenario(sweep);
    c.add_out(sweep, "metrics path");
    std::vector<double> ells, widths;
    std::vector<std::string> ks, schemes;
    std::size_t seeds = 1;
    sweep->add_option("--ells", ells, "loss values to sweep")->delimiter(',');
    sweep->add_option("--widths", widths, "conduit widths to sweep")->delimiter(',');
    sweep->add_option("--ks", ks, "path exponents to sweep (inf for MST)")->delimiter(',');
    sweep->add_option("--schemes", schemes, "mapmesh, mapmesh-flood, gpsr, gpsr-15")
        ->delimiter(',')
        ->check(CLI::IsMember({"mapmesh", "mapmesh-flood", "gpsr", "gpsr-15"}));
    sweep->add_option("--seeds", seeds, "number of seeds per point")->capture_default_str();
    sweep->add_option("--first-seed", c.seed, "first seed (default 1)");

    auto* compare = app.add_subcommand("compare", "MapMesh against GPSR and GPSR-15 on one map");
    c.add_map(compare, false);
    c.add_scenario(compare);
    c.add_out(compare, "joined CSV path");
    std::size_t compare_seeds = 20;
    compare->add_option("--seeds", compare_seeds, "number of seeds")->capture_default_str();
    compare->add_option("--first-seed", c.seed, "first seed (default 1)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*ingest) return cmd_ingest(c, geojson_out);
        if (*graph) return cmd_graph(c);
        if (*feas) return cmd_feasibility(c, ranges);
        if (*tables) return cmd_tables(c, out_dir, tables_csv);
        if (*simulate) return cmd_simulate(c, trace_path);
        if (*sweep) return cmd_sweep(c, ells, widths, ks, schemes, seeds);
        if (*compare) return cmd_compare(c, compare_seeds);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const MapError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ScenarioError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
