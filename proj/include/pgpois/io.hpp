#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pgpois/diagnostics.hpp"
#include "pgpois/errors.hpp"
#include "pgpois/model.hpp"
#include "pgpois/samplers.hpp"

namespace pgpois {

/// File-system failure; reported with the offending path.
class IoError : public DataError {
public:
    using DataError::DataError;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  // 1-based source line of each row
};

/// RFC-4180 CSV with a header row. Lines starting with '#' before the header are skipped.
CsvTable parse_csv(std::istream& in, const std::string& source = "<stream>");
CsvTable read_csv(const std::filesystem::path& path);
std::string csv_escape(const std::string& field);

enum class ColumnKind { numeric, categorical, response };

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    bool standardize = false;
    std::optional<std::string> reference_level;
};

/// Builds a Dataset: numeric columns parsed (optionally standardized with the n-1 variance),
/// categoricals expanded to k-1 dummies "name=level" against the reference level
/// (lexicographic minimum by default), and an intercept prepended unless disabled.
/// With no covariate specs every non-response column is taken as numeric.
Dataset dataset_from_table(const CsvTable& table, const std::vector<ColumnSpec>& specs, bool intercept = true,
                           const std::string& source = "<table>");
Dataset load_dataset(const std::filesystem::path& path, const std::vector<ColumnSpec>& specs, bool intercept = true);

enum class SamplerKind { mh, is };

struct PriorConfig {
    enum class Kind { gaussian, horseshoe } kind = Kind::gaussian;
    double mean = 0.0;
    double variance = 2.0;
    std::optional<long> p_n;
    std::optional<double> tau;
};

struct RunConfig {
    std::string data_path;
    std::vector<ColumnSpec> columns{{"y", ColumnKind::response, false, std::nullopt}};
    bool intercept = true;
    PriorConfig prior;
    SamplerKind sampler = SamplerKind::mh;
    int iterations = 10000;
    int burnin = 5000;
    double d = 0.1;
    double r_min = 1e-2;
    double r_max = 1e6;
    bool closed_form = true;
    std::uint64_t seed = 0;
    double level = 0.95;
    std::string out_dir = "pgpois_out";
    bool keep_burnin = false;
    bool cpo = false;

    void validate() const;
    MHConfig mh_config() const;
    std::string prior_label() const;
};

RunConfig load_run_config(const std::filesystem::path& path);
RunConfig run_config_from_json_text(const std::string& text);
std::string run_config_to_json_text(const RunConfig& config);

/// Prior for a dataset; horseshoe tau comes from `tau` or tau_optimal(n, p_n).
PriorSpec make_prior(const RunConfig& config, const Dataset& data);

/// draws.csv contents.
struct DrawsFile {
    std::vector<std::string> names;
    Eigen::MatrixXd draws;
    std::optional<Eigen::VectorXd> log_weights;
};

DrawsFile read_draws(const std::filesystem::path& path);

std::string summary_to_json_text(const PosteriorSummary& summary, const RunConfig& config,
                                 std::size_t numeric_failures);

/// Writes draws.csv, summary.json, trace.csv (when the trace was kept) and cpo.csv (when given)
/// into `out_dir`, creating it if needed.
void write_outputs(const ChainOutput& chain, const PosteriorSummary& summary, const RunConfig& config,
                   const std::vector<std::string>& names, const std::filesystem::path& out_dir,
                   const CpoResult* cpo_result = nullptr);
void write_outputs(const ISOutput& output, const PosteriorSummary& summary, const RunConfig& config,
                   const std::vector<std::string>& names, const std::filesystem::path& out_dir,
                   const CpoResult* cpo_result = nullptr);

/// Provenance line written at the top of every CSV artifact.
std::string provenance_comment(const RunConfig& config);

/// Writes the dataset (design minus an intercept column named "(Intercept)") as CSV.
void write_dataset_csv(std::ostream& os, const Dataset& data, const std::string& response = "y");

/// Round-tripping representation ("%.17g").
std::string format_double(double v);

}  // namespace pgpois
