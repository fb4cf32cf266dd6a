#include "ssr/scene.hpp"

#include <algorithm>
#include <cmath>

namespace ssr {

const char* kColorNames[8] = {"red", "green", "blue", "yellow", "purple", "orange", "cyan", "magenta"};

const float kColorRgb[8][3] = {
    {0.85f, 0.10f, 0.10f}, {0.10f, 0.70f, 0.15f}, {0.15f, 0.25f, 0.85f}, {0.90f, 0.85f, 0.10f},
    {0.55f, 0.15f, 0.65f}, {0.95f, 0.55f, 0.10f}, {0.10f, 0.80f, 0.80f}, {0.85f, 0.15f, 0.75f},
};

const char* shape_name(Shape s) { return s == Shape::rectangle ? "rectangle" : "circle"; }

std::string SceneObject::name() const {
    return std::string(kColorNames[color]) + " " + shape_name(shape);
}

bool SceneObject::covers(int row, int col) const {
    if (row < y1 || row >= y2 || col < x1 || col >= x2) return false;
    if (shape == Shape::rectangle) return true;
    // ellipse inscribed in the bbox, sampled at pixel centers
    double ry = 0.5 * (y2 - y1), rx = 0.5 * (x2 - x1);
    double dy = (row + 0.5 - center_row()) / ry;
    double dx = (col + 0.5 - center_col()) / rx;
    return dy * dy + dx * dx <= 1.0;
}

void Scene::validate() const {
    if (objects.empty()) fail_validation("scene: needs at least one object");
    if (canvas_h < 64 || canvas_w < 64) fail_validation("scene: canvas must be at least 64x64");
    for (size_t i = 0; i < objects.size(); ++i) {
        const SceneObject& o = objects[i];
        if (o.x2 - o.x1 < 4 || o.y2 - o.y1 < 4)
            fail_validation("scene: object extent below 4x4 px");
        if (o.x1 < 0 || o.y1 < 0 || o.x2 > canvas_w || o.y2 > canvas_h)
            fail_validation("scene: object footprint outside canvas");
        if (!(o.depth > 0.0) || o.depth >= background_depth)
            fail_validation("scene: object depth must be positive and nearer than background");
        for (size_t k = 0; k < i; ++k) {
            const SceneObject& p = objects[k];
            if (p.color == o.color && p.shape == o.shape)
                fail_validation("scene: duplicate (color, shape) pair");
            if (std::abs(p.depth - o.depth) < 0.25 - 1e-9)
                fail_validation("scene: depth gap below 0.25 m");
        }
    }
}

Scene generate_scene(int n_objects, int canvas_h, int canvas_w, uint64_t seed,
                     double background_depth) {
    if (n_objects < 1 || n_objects > 8)
        fail_validation(strf("generate_scene: n_objects=%d outside [1, 8]", n_objects));
    if (canvas_h < 64 || canvas_w < 64)
        fail_validation("generate_scene: canvas must be at least 64x64");
    if (n_objects > 16) fail_validation("generate_scene: palette exhausted");

    Rng rng(seed);
    Scene scene;
    scene.canvas_h = canvas_h;
    scene.canvas_w = canvas_w;
    scene.background_depth = background_depth;

    // distinct (color, shape) pairs drawn from the 8x2 palette
    std::vector<int> combos(16);
    for (int i = 0; i < 16; ++i) combos[size_t(i)] = i;
    rng.shuffle(combos);

    // quarter-meter depth slots in [1, 8]; distinct slots give the 0.25 m gap
    std::vector<int> depth_slots;
    for (int q = 4; q <= 32; ++q) depth_slots.push_back(q);
    rng.shuffle(depth_slots);

    // stratified center positions ensure pairwise row/column separation;
    // slots step by 5 px which clears the required 4 px
    auto center_slots = [&rng](int lo, int hi) {
        std::vector<int> s;
        for (int v = lo; v <= hi; v += 5) s.push_back(v);
        std::vector<int> out = s;
        rng.shuffle(out);
        return out;
    };
    std::vector<int> col_slots = center_slots(13, canvas_w - 14);
    std::vector<int> row_slots = center_slots(13, canvas_h - 14);
    if (int(col_slots.size()) < n_objects || int(row_slots.size()) < n_objects)
        fail_validation("generate_scene: canvas too small for requested object count");

    for (int i = 0; i < n_objects; ++i) {
        SceneObject o;
        o.color = combos[size_t(i)] % 8;
        o.shape = combos[size_t(i)] < 8 ? Shape::rectangle : Shape::circle;
        o.depth = depth_slots[size_t(i)] * 0.25;
        int cc = col_slots[size_t(i)], cr = row_slots[size_t(i)];
        // even extents in [10, 24] keep the bbox centered on the slot
        int w = 10 + 2 * rng.below(8);
        int h = 10 + 2 * rng.below(8);
        w = std::min(w, 2 * std::min(cc, canvas_w - cc));
        h = std::min(h, 2 * std::min(cr, canvas_h - cr));
        o.x1 = cc - w / 2;
        o.x2 = cc + w / 2;
        o.y1 = cr - h / 2;
        o.y2 = cr + h / 2;
        scene.objects.push_back(o);
    }
    scene.validate();
    return scene;
}

Rendered render_scene(const Scene& scene) {
    scene.validate();
    Rendered out;
    out.h = scene.canvas_h;
    out.w = scene.canvas_w;
    out.image.assign(size_t(out.h) * size_t(out.w) * 3, 0.92f);  // light gray background
    out.depth.assign(size_t(out.h) * size_t(out.w), float(scene.background_depth));
    for (int r = 0; r < out.h; ++r) {
        for (int c = 0; c < out.w; ++c) {
            const SceneObject* best = nullptr;
            for (const SceneObject& o : scene.objects)
                if (o.covers(r, c) && (!best || o.depth < best->depth)) best = &o;
            if (!best) continue;
            size_t pi = size_t(r) * size_t(out.w) + size_t(c);
            out.depth[pi] = float(best->depth);
            for (int ch = 0; ch < 3; ++ch) out.image[pi * 3 + size_t(ch)] = kColorRgb[best->color][ch];
        }
    }
    return out;
}

}  // namespace ssr
