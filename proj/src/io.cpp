#include "pgpois/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace pgpois {

using json = nlohmann::ordered_json;

namespace {

bool parse_real(const std::string& text, double& value) {
    if (text.empty()) return false;
    const char* begin = text.c_str();
    char* end = nullptr;
    errno = 0;
    value = std::strtod(begin, &end);
    return end == begin + text.size() && errno != ERANGE;
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t");
    return s.substr(first, last - first + 1);
}

std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    return os;
}

const char* kind_name(ColumnKind kind) {
    switch (kind) {
        case ColumnKind::numeric: return "numeric";
        case ColumnKind::categorical: return "categorical";
        case ColumnKind::response: return "response";
    }
    return "numeric";
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

CsvTable parse_csv(std::istream& in, const std::string& source) {
    CsvTable table;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_was_quoted = false;
    bool at_record_start = true;
    bool skipping_comment = false;
    std::size_t line = 1;
    std::size_t record_line = 1;

    const auto finish_record = [&]() {
        record.push_back(field);
        field.clear();
        field_was_quoted = false;
        const bool blank = record.size() == 1 && record[0].empty();
        if (!blank) {
            if (table.header.empty()) {
                table.header = record;
            } else {
                if (record.size() != table.header.size())
                    throw DataError(source + ": line " + std::to_string(record_line) + " has " +
                                    std::to_string(record.size()) + " fields, header has " +
                                    std::to_string(table.header.size()));
                table.rows.push_back(record);
                table.line_numbers.push_back(record_line);
            }
        }
        record.clear();
        at_record_start = true;
    };

    char c;
    while (in.get(c)) {
        if (skipping_comment) {
            if (c == '\n') {
                skipping_comment = false;
                ++line;
            }
            continue;
        }
        if (at_record_start) {
            record_line = line;
            at_record_start = false;
            if (c == '#' && table.header.empty()) {
                skipping_comment = true;
                at_record_start = true;
                continue;
            }
        }
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field += '"';
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field += c;
            }
            continue;
        }
        if (c == '"' && field.empty() && !field_was_quoted) {
            in_quotes = true;
            field_was_quoted = true;
        } else if (c == ',') {
            record.push_back(field);
            field.clear();
            field_was_quoted = false;
        } else if (c == '\r') {
            if (in.peek() != '\n') field += c;
        } else if (c == '\n') {
            finish_record();
            ++line;
        } else {
            field += c;
        }
    }
    if (in_quotes) throw DataError(source + ": unterminated quoted field starting on line " + std::to_string(record_line));
    if (!at_record_start || !field.empty() || !record.empty()) finish_record();
    if (table.header.empty()) throw DataError(source + ": missing header row");
    return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return parse_csv(in, path.string());
}

Dataset dataset_from_table(const CsvTable& table, const std::vector<ColumnSpec>& specs, bool intercept,
                           const std::string& source) {
    std::map<std::string, std::size_t> index;
    for (std::size_t j = 0; j < table.header.size(); ++j) {
        if (!index.emplace(table.header[j], j).second)
            throw DataError(source + ": duplicate column '" + table.header[j] + "'");
    }
    const auto column_of = [&](const std::string& name) {
        auto it = index.find(name);
        if (it == index.end()) throw DataError(source + ": unknown column '" + name + "'");
        return it->second;
    };

    std::vector<const ColumnSpec*> responses;
    std::vector<ColumnSpec> covariates;
    for (const auto& s : specs) {
        if (s.kind == ColumnKind::response)
            responses.push_back(&s);
        else
            covariates.push_back(s);
    }
    if (responses.size() != 1) throw ArgumentError("exactly one response column must be specified");
    const std::string& response = responses.front()->name;
    const std::size_t response_col = column_of(response);
    if (covariates.empty()) {
        for (const auto& name : table.header)
            if (name != response) covariates.push_back({name, ColumnKind::numeric, false, std::nullopt});
    }

    const auto n = static_cast<Eigen::Index>(table.rows.size());
    if (n < 1) throw DataError(source + ": no data rows");
    const auto cell_error = [&](Eigen::Index i, const std::string& column, const std::string& what) {
        return DataError(source + ": line " + std::to_string(table.line_numbers[i]) + ", column '" + column + "': " + what);
    };

    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::string cell = trim(table.rows[i][response_col]);
        double v;
        if (!parse_real(cell, v)) throw cell_error(i, response, "'" + cell + "' is not a number");
        if (!(v >= 0.0) || v != std::floor(v) || !std::isfinite(v))
            throw cell_error(i, response, "'" + cell + "' is not a non-negative integer count");
        y[i] = v;
    }

    std::vector<Eigen::VectorXd> columns;
    std::vector<std::string> names;
    if (intercept) {
        columns.emplace_back(Eigen::VectorXd::Ones(n));
        names.emplace_back("(Intercept)");
    }
    for (const auto& spec : covariates) {
        const std::size_t col = column_of(spec.name);
        if (spec.kind == ColumnKind::numeric) {
            if (spec.reference_level) throw ArgumentError("column '" + spec.name + "': reference_level needs a categorical column");
            Eigen::VectorXd v(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                const std::string cell = trim(table.rows[i][col]);
                if (!parse_real(cell, v[i]) || !std::isfinite(v[i]))
                    throw cell_error(i, spec.name, "'" + cell + "' is not a finite number");
            }
            if (spec.standardize) {
                if (n < 2) throw DataError(source + ": cannot standardize '" + spec.name + "' with one row");
                v.array() -= v.mean();
                const double sd = std::sqrt(v.squaredNorm() / static_cast<double>(n - 1));
                if (!(sd > 0.0)) throw DataError(source + ": column '" + spec.name + "' is constant and cannot be standardized");
                v /= sd;
            }
            columns.push_back(std::move(v));
            names.push_back(spec.name);
        } else {
            if (spec.standardize) throw ArgumentError("column '" + spec.name + "': only numeric columns can be standardized");
            std::set<std::string> levels;
            for (Eigen::Index i = 0; i < n; ++i) levels.insert(table.rows[i][col]);
            std::string reference = *levels.begin();
            if (spec.reference_level) {
                if (!levels.count(*spec.reference_level))
                    throw DataError(source + ": reference level '" + *spec.reference_level + "' not observed in column '" +
                                    spec.name + "'");
                reference = *spec.reference_level;
            }
            for (const auto& level : levels) {
                if (level == reference) continue;
                Eigen::VectorXd v(n);
                for (Eigen::Index i = 0; i < n; ++i) v[i] = table.rows[i][col] == level ? 1.0 : 0.0;
                columns.push_back(std::move(v));
                names.push_back(spec.name + "=" + level);
            }
        }
    }
    if (columns.empty()) throw DataError(source + ": design has no columns");

    DesignMatrix<double> X(n, static_cast<Eigen::Index>(columns.size()));
    for (std::size_t j = 0; j < columns.size(); ++j) X.col(static_cast<Eigen::Index>(j)) = columns[j];
    return Dataset(std::move(y), std::move(X), std::move(names));
}

Dataset load_dataset(const std::filesystem::path& path, const std::vector<ColumnSpec>& specs, bool intercept) {
    return dataset_from_table(read_csv(path), specs, intercept, path.string());
}

void RunConfig::validate() const {
    if (iterations < 1) throw ArgumentError("iterations must be positive");
    if (burnin < 0 || burnin >= iterations) throw ArgumentError("burnin must satisfy 0 <= burnin < iterations");
    if (!(d > 0.0) || !std::isfinite(d)) throw ArgumentError("d must be positive");
    if (!(level > 0.0 && level < 1.0)) throw ArgumentError("level must lie in (0, 1)");
    if (prior.kind == PriorConfig::Kind::gaussian && !(prior.variance > 0.0))
        throw ArgumentError("gaussian prior variance must be positive");
    if (prior.kind == PriorConfig::Kind::horseshoe && !prior.tau && !prior.p_n)
        throw ArgumentError("horseshoe prior needs tau or p_n");
    if (prior.tau && !(*prior.tau > 0.0)) throw ArgumentError("horseshoe tau must be positive");
    const auto responses = std::count_if(columns.begin(), columns.end(),
                                         [](const ColumnSpec& c) { return c.kind == ColumnKind::response; });
    if (responses != 1) throw ArgumentError("exactly one response column must be specified");
    TuningPolicy{d, r_min, r_max, closed_form}.validate();
}

MHConfig RunConfig::mh_config() const {
    MHConfig mh;
    mh.iterations = iterations;
    mh.burnin = burnin;
    mh.tuning = TuningPolicy{d, r_min, r_max, closed_form};
    mh.seed = seed;
    mh.keep_burnin = keep_burnin;
    return mh;
}

std::string RunConfig::prior_label() const {
    if (prior.kind == PriorConfig::Kind::gaussian)
        return "gaussian(mean=" + format_double(prior.mean) + ";variance=" + format_double(prior.variance) + ")";
    if (prior.tau) return "horseshoe(tau=" + format_double(*prior.tau) + ")";
    return "horseshoe(p_n=" + std::to_string(*prior.p_n) + ")";
}

namespace {

json config_to_json(const RunConfig& c) {
    json cols = json::array();
    for (const auto& s : c.columns) {
        json col = {{"name", s.name}, {"kind", kind_name(s.kind)}};
        if (s.standardize) col["standardize"] = true;
        if (s.reference_level) col["reference_level"] = *s.reference_level;
        cols.push_back(col);
    }
    json prior;
    if (c.prior.kind == PriorConfig::Kind::gaussian) {
        prior = {{"type", "gaussian"}, {"mean", c.prior.mean}, {"variance", c.prior.variance}};
    } else {
        prior = {{"type", "horseshoe"}};
        if (c.prior.tau) prior["tau"] = *c.prior.tau;
        if (c.prior.p_n) prior["p_n"] = *c.prior.p_n;
    }
    return {{"data", c.data_path},
            {"columns", cols},
            {"intercept", c.intercept},
            {"prior", prior},
            {"sampler", c.sampler == SamplerKind::mh ? "mh" : "is"},
            {"iterations", c.iterations},
            {"burnin", c.burnin},
            {"d", c.d},
            {"r_min", c.r_min},
            {"r_max", c.r_max},
            {"closed_form", c.closed_form},
            {"seed", c.seed},
            {"level", c.level},
            {"out", c.out_dir},
            {"keep_burnin", c.keep_burnin},
            {"cpo", c.cpo}};
}

ColumnKind parse_kind(const std::string& s) {
    if (s == "numeric") return ColumnKind::numeric;
    if (s == "categorical") return ColumnKind::categorical;
    if (s == "response") return ColumnKind::response;
    throw ArgumentError("unknown column kind '" + s + "'");
}

}  // namespace

RunConfig run_config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ArgumentError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ArgumentError("config must be a JSON object");
    static const std::set<std::string> known{"data", "columns", "intercept", "prior", "sampler", "iterations",
                                             "burnin", "d", "r_min", "r_max", "closed_form", "seed",
                                             "level", "out", "keep_burnin", "cpo", "response"};
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw ArgumentError("unknown config key '" + key + "'");

    RunConfig c;
    try {
        c.data_path = j.value("data", c.data_path);
        if (j.contains("columns")) {
            c.columns.clear();
            for (const auto& col : j.at("columns")) {
                ColumnSpec s;
                s.name = col.at("name").get<std::string>();
                s.kind = parse_kind(col.value("kind", std::string("numeric")));
                s.standardize = col.value("standardize", false);
                if (col.contains("reference_level")) s.reference_level = col.at("reference_level").get<std::string>();
                c.columns.push_back(s);
            }
        }
        if (j.contains("response")) {
            std::erase_if(c.columns, [](const ColumnSpec& s) { return s.kind == ColumnKind::response; });
            c.columns.insert(c.columns.begin(), {j.at("response").get<std::string>(), ColumnKind::response, false, std::nullopt});
        }
        c.intercept = j.value("intercept", c.intercept);
        if (j.contains("prior")) {
            const auto& pj = j.at("prior");
            const std::string type = pj.value("type", std::string("gaussian"));
            if (type == "gaussian") {
                c.prior.kind = PriorConfig::Kind::gaussian;
                c.prior.mean = pj.value("mean", 0.0);
                c.prior.variance = pj.value("variance", 2.0);
            } else if (type == "horseshoe") {
                c.prior.kind = PriorConfig::Kind::horseshoe;
                if (pj.contains("tau")) c.prior.tau = pj.at("tau").get<double>();
                if (pj.contains("p_n")) c.prior.p_n = pj.at("p_n").get<long>();
            } else {
                throw ArgumentError("unknown prior type '" + type + "'");
            }
        }
        if (j.contains("sampler")) {
            const std::string s = j.at("sampler").get<std::string>();
            if (s != "mh" && s != "is") throw ArgumentError("sampler must be 'mh' or 'is'");
            c.sampler = s == "mh" ? SamplerKind::mh : SamplerKind::is;
        }
        c.iterations = j.value("iterations", c.iterations);
        c.burnin = j.value("burnin", c.burnin);
        c.d = j.value("d", c.d);
        c.r_min = j.value("r_min", c.r_min);
        c.r_max = j.value("r_max", c.r_max);
        c.closed_form = j.value("closed_form", c.closed_form);
        c.seed = j.value("seed", c.seed);
        c.level = j.value("level", c.level);
        c.out_dir = j.value("out", c.out_dir);
        c.keep_burnin = j.value("keep_burnin", c.keep_burnin);
        c.cpo = j.value("cpo", c.cpo);
    } catch (const json::exception& e) {
        throw ArgumentError(std::string("invalid config: ") + e.what());
    }
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return run_config_from_json_text(buffer.str());
}

std::string run_config_to_json_text(const RunConfig& config) { return config_to_json(config).dump(2); }

PriorSpec make_prior(const RunConfig& config, const Dataset& data) {
    if (config.prior.kind == PriorConfig::Kind::gaussian)
        return GaussianPrior::isotropic(data.p(), config.prior.mean, config.prior.variance);
    if (config.prior.tau) return HorseshoePrior{*config.prior.tau};
    return HorseshoePrior{tau_optimal(static_cast<long>(data.n()), *config.prior.p_n)};
}

DrawsFile read_draws(const std::filesystem::path& path) {
    const CsvTable table = read_csv(path);
    DrawsFile out;
    std::size_t p = table.header.size();
    if (!table.header.empty() && table.header.back() == "log_weight") --p;
    out.names.assign(table.header.begin(), table.header.begin() + static_cast<std::ptrdiff_t>(p));
    const auto T = static_cast<Eigen::Index>(table.rows.size());
    out.draws.resize(T, static_cast<Eigen::Index>(p));
    if (p < table.header.size()) out.log_weights = Eigen::VectorXd(T);
    for (Eigen::Index t = 0; t < T; ++t) {
        for (std::size_t j = 0; j < table.header.size(); ++j) {
            double v;
            const std::string& cell = table.rows[t][j];
            if (!parse_real(cell, v))
                throw DataError(path.string() + ": line " + std::to_string(table.line_numbers[t]) + ", column '" +
                                table.header[j] + "': '" + cell + "' is not a number");
            if (j < p)
                out.draws(t, static_cast<Eigen::Index>(j)) = v;
            else
                (*out.log_weights)[t] = v;
        }
    }
    return out;
}

std::string summary_to_json_text(const PosteriorSummary& summary, const RunConfig& config,
                                 std::size_t numeric_failures) {
    json coefs = json::array();
    for (const auto& c : summary.coefficients) {
        coefs.push_back({{"name", c.name},
                         {"mean", c.mean},
                         {"sd", c.sd},
                         {"lower", c.lower},
                         {"upper", c.upper},
                         {"ess", c.ess},
                         {"excludes_zero", c.excludes_zero}});
    }
    json j = {{"sampler", config.sampler == SamplerKind::mh ? "mh" : "is"},
              {"level", summary.level},
              {"draws", summary.draws},
              {"coefficients", coefs}};
    j["acceptance_rate"] = summary.acceptance_rate ? json(*summary.acceptance_rate) : json(nullptr);
    j["weight_ess"] = summary.weight_ess ? json(*summary.weight_ess) : json(nullptr);
    j["elapsed_seconds"] = summary.elapsed_seconds;
    j["time_per_independent_sample"] = summary.time_per_independent_sample;
    j["numeric_failures"] = numeric_failures;
    j["config"] = config_to_json(config);
    return j.dump(2) + "\n";
}

std::string provenance_comment(const RunConfig& config) {
    return "# pgpois sampler=" + std::string(config.sampler == SamplerKind::mh ? "mh" : "is") +
           " seed=" + std::to_string(config.seed) + " d=" + format_double(config.d) + " prior=" + config.prior_label() +
           " iterations=" + std::to_string(config.iterations) + " burnin=" + std::to_string(config.burnin);
}

namespace {

void write_matrix_csv(const std::filesystem::path& path, const std::string& comment,
                      const std::vector<std::string>& names, const Eigen::MatrixXd& m,
                      const Eigen::VectorXd* extra = nullptr, const std::string& extra_name = "") {
    auto os = open_for_write(path);
    os << comment << '\n';
    for (std::size_t j = 0; j < names.size(); ++j) os << (j ? "," : "") << csv_escape(names[j]);
    if (extra) os << ',' << extra_name;
    os << '\n';
    for (Eigen::Index t = 0; t < m.rows(); ++t) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << format_double(m(t, j));
        if (extra) os << ',' << format_double((*extra)[t]);
        os << '\n';
    }
    if (!os) throw IoError("failed writing '" + path.string() + "'");
}

void write_common(const PosteriorSummary& summary, const RunConfig& config, std::size_t failures,
                  const std::filesystem::path& out_dir, const CpoResult* cpo_result) {
    {
        auto os = open_for_write(out_dir / "summary.json");
        os << summary_to_json_text(summary, config, failures);
        if (!os) throw IoError("failed writing '" + (out_dir / "summary.json").string() + "'");
    }
    if (cpo_result) {
        auto os = open_for_write(out_dir / "cpo.csv");
        os << provenance_comment(config) << '\n' << "observation,cpo,log_cpo,unstable\n";
        for (Eigen::Index i = 0; i < cpo_result->cpo.size(); ++i) {
            const bool unstable = std::find(cpo_result->unstable.begin(), cpo_result->unstable.end(), i) !=
                                  cpo_result->unstable.end();
            os << i << ',' << format_double(cpo_result->cpo[i]) << ',' << format_double(cpo_result->log_cpo[i]) << ','
               << (unstable ? 1 : 0) << '\n';
        }
        if (!os) throw IoError("failed writing '" + (out_dir / "cpo.csv").string() + "'");
    }
}

void ensure_dir(const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + out_dir.string() + "': " + ec.message());
}

}  // namespace

void write_outputs(const ChainOutput& chain, const PosteriorSummary& summary, const RunConfig& config,
                   const std::vector<std::string>& names, const std::filesystem::path& out_dir,
                   const CpoResult* cpo_result) {
    ensure_dir(out_dir);
    write_matrix_csv(out_dir / "draws.csv", provenance_comment(config), names, chain.draws);
    if (chain.trace) write_matrix_csv(out_dir / "trace.csv", provenance_comment(config), names, *chain.trace);
    write_common(summary, config, chain.numeric_failures, out_dir, cpo_result);
}

void write_outputs(const ISOutput& output, const PosteriorSummary& summary, const RunConfig& config,
                   const std::vector<std::string>& names, const std::filesystem::path& out_dir,
                   const CpoResult* cpo_result) {
    ensure_dir(out_dir);
    write_matrix_csv(out_dir / "draws.csv", provenance_comment(config), names, output.draws, &output.log_weights,
                     "log_weight");
    if (output.trace) write_matrix_csv(out_dir / "trace.csv", provenance_comment(config), names, *output.trace);
    write_common(summary, config, output.numeric_failures, out_dir, cpo_result);
}

void write_dataset_csv(std::ostream& os, const Dataset& data, const std::string& response) {
    const auto& names = data.column_names();
    const bool has_intercept = !names.empty() && names[0] == "(Intercept)";
    os << csv_escape(response);
    for (std::size_t j = has_intercept ? 1 : 0; j < names.size(); ++j) os << ',' << csv_escape(names[j]);
    os << '\n';
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        os << format_double(data.y()[i]);
        for (Eigen::Index j = has_intercept ? 1 : 0; j < data.p(); ++j) os << ',' << format_double(data.X()(i, j));
        os << '\n';
    }
}

}  // namespace pgpois
