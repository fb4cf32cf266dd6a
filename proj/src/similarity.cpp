#include "ssr/similarity.hpp"

#include <cmath>
#include <filesystem>

#include "json.hpp"
#include "ssr/image_io.hpp"

namespace fs = std::filesystem;

namespace ssr {

double cosine(const std::vector<double>& a, const std::vector<double>& b, int* zero_count) {
    if (a.size() != b.size()) fail_validation("cosine: length mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        if (zero_count) ++*zero_count;
        return 0.0;
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

std::vector<double> mean_rows(const Mat& m, const std::vector<int>& rows) {
    std::vector<double> out(size_t(m.cols), 0.0);
    if (rows.empty()) return out;
    for (int r : rows)
        for (int c = 0; c < m.cols; ++c) out[size_t(c)] += m.at(r, c);
    for (double& v : out) v /= double(rows.size());
    return out;
}

std::vector<double> mean_all_rows(const Mat& m) {
    std::vector<int> rows(size_t(m.rows));
    for (int r = 0; r < m.rows; ++r) rows[size_t(r)] = r;
    return mean_rows(m, rows);
}

}  // namespace

SimilarityResult similarity_analysis(const SsrModel& m, const std::vector<Sample>& samples) {
    int n = int(samples.size());
    if (n < 2) fail_validation("similarity analysis needs at least two samples");
    for (const Sample& s : samples)
        if (!s.rationale || s.rationale->empty())
            fail_validation("sample " + s.id + " carries no rationale");

    std::vector<std::vector<double>> lat(n), txt(n);
    const Mat& embed = m.vlm.lm.embed->w;
    for (int i = 0; i < n; ++i) {
        lat[size_t(i)] = mean_all_rows(m.latents_value(samples[size_t(i)]));
        std::vector<int> ids = m.tok.encode(*samples[size_t(i)].rationale);
        txt[size_t(i)] = mean_rows(embed, ids);
    }

    SimilarityResult res;
    res.n = n;
    res.matrix.resize(size_t(n) * size_t(n));
    double diag = 0.0, off = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double c = cosine(lat[size_t(i)], txt[size_t(j)], &res.zero_vectors);
            res.matrix[size_t(i) * size_t(n) + size_t(j)] = c;
            (i == j ? diag : off) += c;
        }
    res.stat = diag / n - off / (double(n) * (n - 1));
    return res;
}

std::string similarity_csv(const SimilarityResult& r) {
    std::string out;
    for (int i = 0; i < r.n; ++i) {
        for (int j = 0; j < r.n; ++j) {
            if (j) out += ",";
            out += strf("%.6f", r.at(i, j));
        }
        out += "\n";
    }
    return out;
}

void write_similarity(const std::string& dir, const SimilarityResult& r) {
    fs::create_directories(dir);
    write_file_atomic((fs::path(dir) / "similarity.csv").string(), similarity_csv(r));

    nlohmann::json meta = {{"n", r.n}, {"stat", r.stat}, {"zero_vectors", r.zero_vectors}};
    write_file_atomic((fs::path(dir) / "similarity.json").string(), meta.dump(2) + "\n");

    const int cell = std::max(1, 256 / std::max(1, r.n));
    Rgb8 img;
    img.h = r.n * cell;
    img.w = r.n * cell;
    img.px.assign(size_t(img.h) * size_t(img.w) * 3, 0);
    for (int i = 0; i < r.n; ++i)
        for (int j = 0; j < r.n; ++j) {
            double v = std::clamp(r.at(i, j), -1.0, 1.0);
            // -1 deep blue, 0 white, +1 deep red
            uint8_t red = uint8_t(lround(255.0 * (v >= 0 ? 1.0 : 1.0 + v)));
            uint8_t grn = uint8_t(lround(255.0 * (1.0 - std::fabs(v))));
            uint8_t blu = uint8_t(lround(255.0 * (v <= 0 ? 1.0 : 1.0 - v)));
            for (int y = 0; y < cell; ++y)
                for (int x = 0; x < cell; ++x) {
                    size_t px = (size_t(i * cell + y) * size_t(img.w) + size_t(j * cell + x)) * 3;
                    img.px[px] = red;
                    img.px[px + 1] = grn;
                    img.px[px + 2] = blu;
                }
        }
    write_ppm8((fs::path(dir) / "similarity.ppm").string(), img);
}

}  // namespace ssr
