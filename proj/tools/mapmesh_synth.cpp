// mapmesh-synth: generate synthetic grid cities as GeoJSON or native maps.

#include <mapmesh/mapmesh.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace mapmesh;

int main(int argc, char** argv)
{
    CLI::App app{"Synthetic grid city generator"};
    synth::GridCityParams p;
    std::uint64_t seed = 1;
    std::string out;
    std::string format = "geojson";
    app.add_option("--rows", p.rows, "block rows")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--cols", p.cols, "block columns")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--pitch", p.pitch_m, "block spacing in meters")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--min-side", p.min_side_m, "smallest footprint side in meters")->capture_default_str();
    app.add_option("--max-side", p.max_side_m, "largest footprint side in meters")->capture_default_str();
    app.add_option("--jitter", p.jitter_m, "footprint offset inside its block in meters")->capture_default_str();
    app.add_option("--voids", p.voids, "rectangular empty areas")->capture_default_str()->check(CLI::NonNegativeNumber);
    app.add_option("--void-min", p.void_min_blocks, "smallest void side in blocks")->capture_default_str();
    app.add_option("--void-max", p.void_max_blocks, "largest void side in blocks")->capture_default_str();
    app.add_option("--drop", p.drop_fraction, "probability that a block stays empty")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    app.add_option("--seed", seed, "generator seed")->capture_default_str();
    app.add_option("--format", format, "geojson or native")
        ->capture_default_str()
        ->check(CLI::IsMember({"geojson", "native"}));
    app.add_option("-o,--out", out, "output path (default stdout for GeoJSON)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const auto map = synth::grid_city(p, seed);
        if (format == "native") {
            if (out.empty()) throw std::invalid_argument("native output needs --out");
            const auto bytes = serialize_map(map);
            std::ofstream f(out, std::ios::binary);
            if (!f) throw std::invalid_argument("cannot write '" + out + "'");
            f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        } else if (out.empty()) {
            std::cout << to_geojson(map) << '\n';
        } else {
            std::ofstream f(out, std::ios::binary);
            if (!f) throw std::invalid_argument("cannot write '" + out + "'");
            f << to_geojson(map) << '\n';
        }
        std::cerr << "wrote " << map.size() << " buildings\n";
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
