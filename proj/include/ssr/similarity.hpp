#pragma once

#include "ssr/trainer.hpp"

namespace ssr {

// cosine over raw double vectors; a zero-norm side yields 0 and bumps the
// counter when given
double cosine(const std::vector<double>& a, const std::vector<double>& b,
              int* zero_count = nullptr);

struct SimilarityResult {
    int n = 0;
    std::vector<double> matrix;  // n*n row-major, entry(i,j) = cos(latents_i, rationale_j)
    double stat = 0.0;           // mean(diagonal) - mean(off-diagonal)
    int zero_vectors = 0;
    double at(int i, int j) const { return matrix[size_t(i) * n + j]; }
};

// Pairs each sample's mean-pooled latent tokens against every sample's
// rationale embedding (mean of the vision lm's frozen word-embedding rows
// over the rationale tokens). Needs at least two samples, each carrying a
// rationale.
SimilarityResult similarity_analysis(const SsrModel& m, const std::vector<Sample>& samples);

std::string similarity_csv(const SimilarityResult& r);

// similarity.csv, similarity.json (stat, n, zero_vectors) and similarity.ppm
// (blue-white-red heatmap, one pixel per cell scaled up for visibility)
void write_similarity(const std::string& dir, const SimilarityResult& r);

}  // namespace ssr
