#include <cmath>
#include <set>

#include "doctest.h"
#include "ssr/scene.hpp"

using namespace ssr;

TEST_CASE("same seed reproduces the scene exactly") {
    Scene a = generate_scene(2, 64, 64, 7);
    Scene b = generate_scene(2, 64, 64, 7);
    REQUIRE(a.objects.size() == b.objects.size());
    for (size_t i = 0; i < a.objects.size(); ++i) {
        CHECK(a.objects[i].color == b.objects[i].color);
        CHECK(a.objects[i].shape == b.objects[i].shape);
        CHECK(a.objects[i].x1 == b.objects[i].x1);
        CHECK(a.objects[i].y2 == b.objects[i].y2);
        CHECK(a.objects[i].depth == b.objects[i].depth);
    }
}

TEST_CASE("object count preconditions") {
    CHECK_THROWS_AS(generate_scene(0, 64, 64, 1), ValidationError);
    CHECK_THROWS_AS(generate_scene(9, 64, 64, 1), ValidationError);
    CHECK_THROWS_AS(generate_scene(2, 32, 64, 1), ValidationError);
}

TEST_CASE("generated scenes satisfy the documented guarantees") {
    for (uint64_t seed = 0; seed < 1000; ++seed) {
        Scene s = generate_scene(3, 64, 64, seed);
        std::set<std::pair<int, int>> combos;
        for (size_t i = 0; i < s.objects.size(); ++i) {
            const SceneObject& o = s.objects[i];
            combos.insert({o.color, int(o.shape)});
            CHECK(o.x2 - o.x1 >= 4);
            CHECK(o.y2 - o.y1 >= 4);
            CHECK(o.x1 >= 0);
            CHECK(o.y1 >= 0);
            CHECK(o.x2 <= 64);
            CHECK(o.y2 <= 64);
            for (size_t k = 0; k < i; ++k) {
                const SceneObject& p = s.objects[k];
                CHECK(std::abs(o.depth - p.depth) >= 0.25 - 1e-12);
                CHECK(std::abs(o.center_col() - p.center_col()) >= 4.0);
                CHECK(std::abs(o.center_row() - p.center_row()) >= 4.0);
            }
        }
        CHECK(combos.size() == s.objects.size());
    }
}

TEST_CASE("larger canvases are honored") {
    Scene s = generate_scene(8, 96, 128, 3);
    CHECK(s.canvas_h == 96);
    CHECK(s.canvas_w == 128);
    for (const SceneObject& o : s.objects) {
        CHECK(o.x2 <= 128);
        CHECK(o.y2 <= 96);
    }
}

TEST_CASE("overlap renders the nearer object") {
    // two overlapping rectangles with hand-placed footprints
    Scene s;
    s.canvas_h = s.canvas_w = 64;
    SceneObject a;
    a.color = 0;
    a.shape = Shape::rectangle;
    a.x1 = 10;
    a.y1 = 10;
    a.x2 = 30;
    a.y2 = 30;
    a.depth = 2.0;
    SceneObject b;
    b.color = 2;
    b.shape = Shape::rectangle;
    b.x1 = 20;
    b.y1 = 20;
    b.x2 = 40;
    b.y2 = 40;
    b.depth = 5.0;
    s.objects = {a, b};
    Rendered r = render_scene(s);
    // overlap pixel
    size_t pi = 25 * 64 + 25;
    CHECK(r.depth[pi] == 2.0f);
    CHECK(r.image[pi * 3 + 0] == kColorRgb[0][0]);
    // pixel only under b
    pi = 35 * 64 + 35;
    CHECK(r.depth[pi] == 5.0f);
    CHECK(r.image[pi * 3 + 2] == kColorRgb[2][2]);
    // background pixel
    pi = 5 * 64 + 5;
    CHECK(r.depth[pi] == 10.0f);
    CHECK(r.image[pi * 3] == 0.92f);
}

TEST_CASE("render agrees with a per-pixel scene graph oracle") {
    for (uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
        Scene s = generate_scene(4, 64, 64, seed);
        Rendered r = render_scene(s);
        for (int row = 0; row < 64; ++row) {
            for (int col = 0; col < 64; ++col) {
                // independent painter's rule: min depth over covering objects
                double best = s.background_depth;
                int best_color = -1;
                for (const SceneObject& o : s.objects) {
                    if (o.covers(row, col) && o.depth < best) {
                        best = o.depth;
                        best_color = o.color;
                    }
                }
                size_t pi = size_t(row) * 64 + size_t(col);
                REQUIRE(r.depth[pi] == float(best));
                if (best_color >= 0) REQUIRE(r.image[pi * 3] == kColorRgb[best_color][0]);
            }
        }
    }
}

TEST_CASE("scene validation rejects broken graphs") {
    Scene s = generate_scene(2, 64, 64, 1);
    SUBCASE("duplicate color and shape") {
        s.objects.push_back(s.objects[0]);
        s.objects.back().depth = s.objects[0].depth + 1.0;
        s.objects.back().x1 += 0;  // same combo
        CHECK_THROWS_AS(s.validate(), ValidationError);
    }
    SUBCASE("depth gap too small") {
        s.objects[1].depth = s.objects[0].depth + 0.1;
        CHECK_THROWS_AS(s.validate(), ValidationError);
    }
    SUBCASE("deeper than background") {
        s.objects[0].depth = s.background_depth + 1.0;
        CHECK_THROWS_AS(s.validate(), ValidationError);
    }
}
