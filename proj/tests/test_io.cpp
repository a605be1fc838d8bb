#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "fluxonium/errors.hpp"
#include "fluxonium/io.hpp"
#include "fluxonium/synth.hpp"

using namespace fluxonium;

TEST_SUITE("io") {

TEST_CASE("shortest round-trip formatting") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) CHECK(std::stod(io::format_double(v)) == v);
    CHECK(io::format_double(0.1) == "0.1");
}

TEST_CASE("FNV-1a reference vectors") {
    CHECK(io::fnv1a64_hex("") == "cbf29ce484222325");
    CHECK(io::fnv1a64_hex("a") == "af63dc4c8601ec8c");
    CHECK(io::fnv1a64_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("CSV with comments and metadata") {
    const auto t = io::parse_csv("# dt_us=0.784\n# free text\nt,x\n0,1.5\n1, 2.5\n\n");
    CHECK(t.columns == std::vector<std::string>{"t", "x"});
    CHECK(t.values("x") == std::vector<double>{1.5, 2.5});
    CHECK(t.meta.at("dt_us") == "0.784");
    CHECK_THROWS_AS(t.column("y"), DataError);
    CHECK_THROWS_AS(io::parse_csv("a,b\n1\n"), DataError);
    CHECK_THROWS_AS(io::parse_csv("a,b\n1,zz\n"), DataError);
    CHECK_THROWS_AS(io::parse_csv("# only\n"), DataError);
    const auto again = io::parse_csv(io::to_csv(t.columns, t.rows, {"k=v"}));
    CHECK(again.rows == t.rows);
    CHECK(again.meta.at("k") == "v");
}

TEST_CASE("spectroscopy CSV round trip and errors") {
    SpectroscopyDataset d;
    d.points = {{0.0, 10.8, TransitionLabel::ge, 1.0}, {0.1, 13.7, TransitionLabel::gf, 0.5},
                {0.2, 7.1, TransitionLabel::unassigned, 1.0}};
    const auto back = io::parse_spectroscopy_csv(io::to_csv(d));
    REQUIRE(back.points.size() == 3);
    CHECK(back.points[1].label == TransitionLabel::gf);
    CHECK(back.points[1].weight == 0.5);
    CHECK(io::parse_spectroscopy_csv("phi_ext,frequency_ghz,label\n0.1,5,ge\n").points.size() == 1);
    CHECK_THROWS_AS(io::parse_spectroscopy_csv("phi,f,label\n0.1,5,ge\n"), DataError);
    CHECK_THROWS_AS(io::parse_spectroscopy_csv("phi_ext,frequency_ghz,label\n0.1,5,gx\n"), DataError);
}

TEST_CASE("binary and CSV traces round trip bit-exactly") {
    const auto tel = gen_telegraph(9.9, 100.0, 0.784, 500, 1);
    const auto trace = gen_iq_trace(tel, -3.0, 3.0, 1.0, 2);
    const auto bin = io::parse_binary_trace(io::to_binary(trace));
    CHECK(bin.samples == trace.samples);
    CHECK(bin.dt == trace.dt);
    const auto csv = io::parse_trace_csv(io::to_csv(trace));
    CHECK(csv.samples == trace.samples);
    std::string broken = io::to_binary(trace);
    broken.pop_back();
    CHECK_THROWS_AS(io::parse_binary_trace(broken), DataError);
    CHECK_THROWS_AS(io::parse_trace_csv("t_us,i,q\n0,1,2\n"), DataError);
}

TEST_CASE("files: atomic write, read back, dispatch on magic") {
    const auto dir = std::filesystem::temp_directory_path() / "fluxonium_io_test";
    std::filesystem::create_directories(dir);
    const auto tel = gen_telegraph(9.9, 100.0, 0.784, 100, 1);
    const auto trace = gen_iq_trace(tel, -3.0, 3.0, 1.0, 2);
    io::atomic_write(dir / "t.iqt", io::to_binary(trace));
    io::atomic_write(dir / "t.csv", io::to_csv(trace));
    CHECK_FALSE(std::filesystem::exists(dir / "t.iqt.tmp"));
    CHECK(io::read_trace(dir / "t.iqt").samples == trace.samples);
    CHECK(io::read_trace(dir / "t.csv").samples == trace.samples);
    CHECK(io::file_hash(dir / "t.iqt") == io::fnv1a64_hex(io::to_binary(trace)));
    io::atomic_write(dir / "bad.json", "{not json");
    CHECK_THROWS_AS(io::read_json(dir / "bad.json"), ConfigError);
    CHECK_THROWS_AS(io::read_file(dir / "missing"), DataError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("PSD CSV carries its averaging metadata") {
    PsdEstimate p;
    p.frequencies = {0.1, 0.2};
    p.power = {3.0, 4.0};
    p.n_averages = 85;
    p.total_duration = 832.0;
    const auto t = io::parse_csv(io::to_csv(p));
    CHECK(t.meta.at("n_averages") == "85");
    CHECK(t.values("s_hz2_per_hz") == std::vector<double>{3.0, 4.0});
}

}
