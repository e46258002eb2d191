#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace twostage {

/// A run configuration that cannot be honoured (e.g. too many bootstrap combinations).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GeneCounts {
    std::string id;
    std::vector<double> ko;
    std::vector<double> wt;
};

struct ReplicateData {
    std::size_t replicates = 0;
    std::vector<GeneCounts> genes;
};

struct FoldChange {
    std::string id;
    double beta_hat = 0.0;
    double sd_boot = 0.0;
    std::size_t combinations = 0;
};

/// log2(mean(ko) / mean(wt)); throws std::domain_error for a nonpositive mean.
double logfold(std::span<const double> ko, std::span<const double> wt);

inline constexpr std::size_t kMaxBootstrapCombinations = 1000000;

/// Every with-replacement resample of each condition, r^r for KO times r^r
/// for WT, in odometer order (KO resample outer, WT inner; last replicate
/// index fastest). Throws ConfigError above `cap` combinations.
std::vector<double> bootstrap_logfolds(std::span<const double> ko, std::span<const double> wt,
                                       std::size_t cap = kMaxBootstrapCombinations);

struct BootstrapSd {
    double sd = 0.0;
    std::size_t count = 0;
};

/// Sample standard deviation (n - 1 denominator) of bootstrap_logfolds.
BootstrapSd bootstrap_sd(std::span<const double> ko, std::span<const double> wt,
                         std::size_t cap = kMaxBootstrapCombinations);

/// Header gene_id, ko_1..ko_r, wt_1..wt_r; values must be finite and > 0.
/// Errors name the source and row.
ReplicateData parse_counts(std::string_view text, const std::string& source);
/// As parse_counts; gzip input is detected and decompressed.
ReplicateData read_counts(const std::string& path);

/// Fold change and bootstrap SD per gene, in input order. Genes are split
/// across `threads` workers; the result does not depend on the thread count.
std::vector<FoldChange> summarize(const ReplicateData& data, unsigned threads = 1);

/// Columns gene_id, beta_hat, sd_boot.
void write_summary(const std::vector<FoldChange>& summary, const std::string& path, const std::string& comment = "");

}  // namespace twostage
