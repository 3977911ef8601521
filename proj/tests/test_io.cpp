#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "pgpois/io.hpp"

using namespace pgpois;
namespace fs = std::filesystem;
using doctest::Approx;

namespace {

CsvTable parse(const std::string& text) {
    std::istringstream in(text);
    return parse_csv(in, "test.csv");
}

std::vector<ColumnSpec> response_only() { return {{"y", ColumnKind::response, false, std::nullopt}}; }

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("pgpois_test_io_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string message_of(const auto& f) {
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("CSV quoting, comments and line endings") {
    const auto t = parse("# produced elsewhere\n# second comment\r\n\"y\",\"na,me\"\r\n1,\"a \"\"quoted\"\" b\"\r\n2,\"two\nlines\"\n3,\n");
    REQUIRE(t.header.size() == 2);
    CHECK(t.header[1] == "na,me");
    REQUIRE(t.rows.size() == 3);
    CHECK(t.rows[0][1] == "a \"quoted\" b");
    CHECK(t.rows[1][1] == "two\nlines");
    CHECK(t.rows[2][1].empty());
    CHECK(t.line_numbers[0] == 4);
    CHECK(t.line_numbers[2] == 7);
}

TEST_CASE("CSV structural errors") {
    CHECK_THROWS_AS(parse(""), DataError);
    CHECK_THROWS_AS(parse("y,x\n1\n"), DataError);
    CHECK_THROWS_AS(parse("y,x\n1,\"open\n"), DataError);
    CHECK(message_of([] { parse("y,x\n1,2\n3\n"); }).find("line 3") != std::string::npos);
}

TEST_CASE("csv_escape round trips through the parser") {
    for (const std::string s : {"plain", "with,comma", "with \"quote\"", "new\nline", ""}) {
        const auto t = parse("h\n" + csv_escape(s) + "\n");
        if (s.empty()) {
            CHECK((t.rows.empty() || t.rows[0][0].empty()));
        } else {
            CHECK(t.rows[0][0] == s);
        }
    }
}

TEST_CASE("factor encoding against the reference level") {
    const auto t = parse("y,x\n1,b\n0,a\n2,c\n3,a\n");
    const std::vector<ColumnSpec> specs{{"y", ColumnKind::response, false, std::nullopt},
                                        {"x", ColumnKind::categorical, false, std::nullopt}};
    const auto d = dataset_from_table(t, specs);
    CHECK(d.column_names() == std::vector<std::string>{"(Intercept)", "x=b", "x=c"});
    CHECK(d.X().col(1) == Eigen::Vector4d(1, 0, 0, 0));
    CHECK(d.X().col(2) == Eigen::Vector4d(0, 0, 1, 0));

    auto with_ref = specs;
    with_ref[1].reference_level = "c";
    const auto d2 = dataset_from_table(t, with_ref, false);
    CHECK(d2.column_names() == std::vector<std::string>{"x=a", "x=b"});

    with_ref[1].reference_level = "z";
    CHECK_THROWS_AS(dataset_from_table(t, with_ref), DataError);
}

TEST_CASE("standardized columns") {
    std::string text = "y,x,z\n";
    for (int i = 0; i < 37; ++i) text += std::to_string(i % 4) + "," + std::to_string(1e3 + 0.37 * i * i) + "," + std::to_string(i) + "\n";
    const std::vector<ColumnSpec> specs{{"y", ColumnKind::response, false, std::nullopt},
                                        {"x", ColumnKind::numeric, true, std::nullopt},
                                        {"z", ColumnKind::numeric, false, std::nullopt}};
    const auto d = dataset_from_table(parse(text), specs);
    const Eigen::VectorXd x = d.X().col(1);
    CHECK(std::abs(x.mean()) < 1e-12);
    CHECK(std::abs((x.array() - x.mean()).square().sum() / 36.0 - 1.0) < 1e-12);
    CHECK(d.X()(5, 2) == 5.0);
    CHECK_THROWS_AS(dataset_from_table(parse("y,x\n1,2\n2,2\n"), {specs[0], {"x", ColumnKind::numeric, true, std::nullopt}}),
                    DataError);
}

TEST_CASE("response must be a non-negative integer") {
    const auto msg = message_of([] { dataset_from_table(parse("y,x\n1,0.5\n2.5,1\n"), response_only()); });
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("'y'") != std::string::npos);
    CHECK(msg.find("2.5") != std::string::npos);
    CHECK_THROWS_AS(dataset_from_table(parse("y,x\n-1,0.5\n"), response_only()), DataError);
    CHECK_THROWS_AS(dataset_from_table(parse("y,x\nabc,0.5\n"), response_only()), DataError);
}

TEST_CASE("other data errors") {
    CHECK_THROWS_AS(dataset_from_table(parse("y,x\n1,oops\n"), response_only()), DataError);
    CHECK_THROWS_AS(dataset_from_table(parse("y,x\n1,2\n"), {{"count", ColumnKind::response, false, std::nullopt}}), DataError);
    CHECK_THROWS_AS(dataset_from_table(parse("y,y\n1,2\n"), response_only()), DataError);
    CHECK_THROWS_AS(dataset_from_table(parse("y,x\n1,2\n"), {}), ArgumentError);
    CHECK_THROWS_AS(load_dataset("/nonexistent/file.csv", response_only()), DataError);
}

TEST_CASE("encoding is deterministic and round trips") {
    const std::string text = "y,g,x\n1,lo,0.25\n4,hi,-1.5\n0,mid,3.0000000000000004\n2,lo,1e-300\n";
    const std::vector<ColumnSpec> specs{{"y", ColumnKind::response, false, std::nullopt},
                                        {"g", ColumnKind::categorical, false, std::nullopt},
                                        {"x", ColumnKind::numeric, false, std::nullopt}};
    const auto a = dataset_from_table(parse(text), specs);
    const auto b = dataset_from_table(parse(text), specs);
    std::ostringstream sa, sb;
    write_dataset_csv(sa, a);
    write_dataset_csv(sb, b);
    CHECK(sa.str() == sb.str());

    // Dummies reload as numeric columns carrying the same names.
    const auto again = dataset_from_table(parse(sa.str()), response_only());
    CHECK(again.y() == a.y());
    CHECK(again.X() == a.X());
    CHECK(again.column_names() == a.column_names());
}

TEST_CASE("run configuration JSON") {
    const auto c = run_config_from_json_text(R"({
        "data": "d.csv",
        "columns": [{"name": "count", "kind": "response"}, {"name": "g", "kind": "categorical", "reference_level": "b"},
                    {"name": "x", "standardize": true}],
        "prior": {"type": "horseshoe", "p_n": 3},
        "sampler": "is", "iterations": 200, "burnin": 50, "d": 0.5, "seed": 18446744073709551615, "level": 0.9
    })");
    CHECK(c.data_path == "d.csv");
    REQUIRE(c.columns.size() == 3);
    CHECK(c.columns[1].reference_level == "b");
    CHECK(c.columns[2].standardize);
    CHECK(c.prior.kind == PriorConfig::Kind::horseshoe);
    CHECK(c.prior.p_n == 3);
    CHECK(c.sampler == SamplerKind::is);
    CHECK(c.seed == 18446744073709551615ull);
    CHECK(c.mh_config().tuning.d == 0.5);

    const auto back = run_config_from_json_text(run_config_to_json_text(c));
    CHECK(run_config_to_json_text(back) == run_config_to_json_text(c));

    CHECK_THROWS_AS(run_config_from_json_text(R"({"iterations": 10, "burnin": 10})").validate(), ArgumentError);
    CHECK_THROWS_AS(run_config_from_json_text(R"({"d": 0})").validate(), ArgumentError);
    CHECK_THROWS_AS(run_config_from_json_text(R"({"level": 1.0})").validate(), ArgumentError);
    CHECK_THROWS_AS(run_config_from_json_text(R"({"iteration": 10})"), ArgumentError);
    CHECK_THROWS_AS(run_config_from_json_text(R"({"prior": {"type": "laplace"}})"), ArgumentError);
    CHECK_THROWS_AS(run_config_from_json_text(R"({"prior": {"type": "horseshoe"}})").validate(), ArgumentError);
    CHECK_THROWS_AS(run_config_from_json_text("{not json"), ArgumentError);
    CHECK_THROWS_AS(run_config_from_json_text(R"({"columns": [{"name": "a"}]})").validate(), ArgumentError);
}

TEST_CASE("MH outputs round trip") {
    const auto dir = scratch("mh");
    Eigen::VectorXd y(5);
    y << 1, 0, 3, 2, 1;
    DesignMatrix<double> X(5, 2);
    X << 1, 0.1, 1, -0.4, 1, 0.9, 1, 0.3, 1, -0.2;
    const Dataset data(y, X, {"(Intercept)", "x"});
    RunConfig cfg;
    cfg.seed = 4242;
    cfg.iterations = 400;
    cfg.burnin = 100;
    const auto chain = mh_run(data, GaussianPrior::isotropic(2, 0.0, 2.0), cfg.mh_config());
    const auto s = summarize(chain, cfg.level, data.column_names());
    const auto c = cpo(chain.draws, data);
    write_outputs(chain, s, cfg, data.column_names(), dir, &c);

    for (const char* f : {"draws.csv", "cpo.csv"}) {
        const auto text = slurp(dir / f);
        CHECK(text.rfind("# pgpois sampler=mh seed=4242 d=0.10000000000000001 prior=gaussian", 0) == 0);
    }
    const auto draws = read_draws(dir / "draws.csv");
    CHECK(draws.names == data.column_names());
    CHECK_FALSE(draws.log_weights.has_value());
    CHECK(draws.draws == chain.draws);

    const auto j = nlohmann::json::parse(slurp(dir / "summary.json"));
    CHECK(j["config"]["seed"].get<std::uint64_t>() == 4242);
    CHECK(j["coefficients"].size() == 2);
    for (int k = 0; k < 2; ++k) CHECK(std::abs(j["coefficients"][k]["mean"].get<double>() - draws.draws.col(k).mean()) <= 1e-12);
    CHECK(j["acceptance_rate"].get<double>() == chain.acceptance_rate);
    CHECK(j["weight_ess"].is_null());
    CHECK_FALSE(fs::exists(dir / "trace.csv"));
    fs::remove_all(dir);
}

TEST_CASE("IS outputs carry log weights") {
    const auto dir = scratch("is");
    Eigen::VectorXd y(3);
    y << 2, 1, 0;
    DesignMatrix<double> X(3, 1);
    X << 0.5, 0.1, -0.7;
    const Dataset data(y, X);
    RunConfig cfg;
    cfg.sampler = SamplerKind::is;
    cfg.seed = 7;
    cfg.iterations = 300;
    cfg.burnin = 0;
    cfg.keep_burnin = true;
    auto mh = cfg.mh_config();
    const auto out = is_run(data, GaussianPrior::isotropic(1, 0.0, 1.0), mh);
    const auto s = summarize(out, cfg.level, data.column_names());
    write_outputs(out, s, cfg, data.column_names(), dir);
    const auto draws = read_draws(dir / "draws.csv");
    REQUIRE(draws.log_weights.has_value());
    CHECK(*draws.log_weights == out.log_weights);
    CHECK(slurp(dir / "draws.csv").find("beta0,log_weight\n") != std::string::npos);
    const auto again = summarize_draws(draws.draws, draws.log_weights, cfg.level, draws.names);
    CHECK(again.coefficients[0].mean == s.coefficients[0].mean);
    CHECK_FALSE(fs::exists(dir / "cpo.csv"));
    fs::remove_all(dir);
}

TEST_CASE("unwritable output directory") {
    const auto dir = scratch("blocked");
    std::ofstream(dir / "file") << "x";
    RunConfig cfg;
    ChainOutput chain;
    chain.draws = Eigen::MatrixXd::Zero(2, 1);
    PosteriorSummary s;
    CHECK_THROWS_AS(write_outputs(chain, s, cfg, {"b"}, dir / "file" / "sub"), IoError);
    fs::remove_all(dir);
}

TEST_CASE("format_double round trips") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-310, 1e300, 123456789.123456789}) CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
}
