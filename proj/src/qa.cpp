#include "ssr/qa.hpp"

#include <algorithm>
#include <cmath>

namespace ssr {

const char* task_category(TaskKind t) { return task_is_spatial(t) ? "spatial" : "general"; }

const char* task_subtask(TaskKind t) {
    switch (t) {
        case TaskKind::count: return "count";
        case TaskKind::relative_position: return "relative position recognition";
        case TaskKind::position_based_object: return "position based object recognition";
        case TaskKind::existence: return "existence";
        case TaskKind::attribute: return "attribute recognition";
    }
    fail_runtime("bad TaskKind");
}

bool task_is_spatial(TaskKind t) {
    return t == TaskKind::count || t == TaskKind::relative_position ||
           t == TaskKind::position_based_object;
}

std::vector<TaskKind> all_tasks() {
    return {TaskKind::count, TaskKind::relative_position, TaskKind::position_based_object,
            TaskKind::existence, TaskKind::attribute};
}

TaskKind task_from_subtask(const std::string& subtask) {
    for (TaskKind t : all_tasks())
        if (subtask == task_subtask(t)) return t;
    fail_validation("unknown subtask: " + subtask);
}

namespace {

std::string depth_str(double d) { return strf("%.2f", d); }

int crow(const SceneObject& o) { return int(std::lround(o.center_row())); }
int ccol(const SceneObject& o) { return int(std::lround(o.center_col())); }

// the shared facts section: scene size plus one measurement sentence per object
std::string facts_for(const Scene& s) {
    std::string out = strf("the scene contains %d objects", int(s.objects.size()));
    for (const SceneObject& o : s.objects)
        out += strf(" the %s is at row %d column %d about %s meters away", o.name().c_str(),
                    crow(o), ccol(o), depth_str(o.depth).c_str());
    return out;
}

const SceneObject* nearest(const Scene& s) {
    const SceneObject* best = nullptr;
    for (const SceneObject& o : s.objects)
        if (!best || o.depth < best->depth) best = &o;
    return best;
}

}  // namespace

QaItem make_qa(const Scene& scene, TaskKind task, uint64_t seed) {
    scene.validate();
    Rng rng(seed);
    const auto& objs = scene.objects;
    int n = int(objs.size());

    QaItem qa;
    qa.task = task;
    qa.facts = facts_for(scene);

    switch (task) {
        case TaskKind::existence: {
            bool present = rng.uniform() < 0.5;
            if (present) {
                const SceneObject& o = objs[size_t(rng.below(n))];
                qa.question = strf("is there a %s", o.name().c_str());
                qa.conclusion = strf("the %s matches so the answer is yes", o.name().c_str());
                qa.answer = "yes";
            } else {
                // pick an absent (color, shape) combo deterministically
                std::vector<int> absent;
                for (int combo = 0; combo < 16; ++combo) {
                    bool found = false;
                    for (const SceneObject& o : objs)
                        if (o.color == combo % 8 &&
                            o.shape == (combo < 8 ? Shape::rectangle : Shape::circle))
                            found = true;
                    if (!found) absent.push_back(combo);
                }
                int combo = absent[size_t(rng.below(int(absent.size())))];
                std::string name = std::string(kColorNames[combo % 8]) + " " +
                                   shape_name(combo < 8 ? Shape::rectangle : Shape::circle);
                qa.question = strf("is there a %s", name.c_str());
                qa.conclusion = strf("no object is a %s so the answer is no", name.c_str());
                qa.answer = "no";
            }
            break;
        }

        case TaskKind::attribute: {
            // variant 1 needs an object whose color is unique in the scene
            std::vector<int> unique_color;
            for (int i = 0; i < n; ++i) {
                bool uniq = true;
                for (int k = 0; k < n; ++k)
                    if (k != i && objs[size_t(k)].color == objs[size_t(i)].color) uniq = false;
                if (uniq) unique_color.push_back(i);
            }
            int variant = unique_color.empty() ? 0 : rng.below(2);
            if (variant == 0) {
                const SceneObject* o = nearest(scene);
                qa.question = "what color is the object nearest to the camera";
                qa.conclusion = strf(
                    "the object nearest to the camera is the %s because %s meters is the smallest "
                    "distance so the answer is %s",
                    o->name().c_str(), depth_str(o->depth).c_str(), kColorNames[o->color]);
                qa.answer = kColorNames[o->color];
            } else {
                const SceneObject& o = objs[size_t(unique_color[size_t(rng.below(int(unique_color.size())))])];
                qa.question = strf("what shape is the %s object", kColorNames[o.color]);
                qa.conclusion = strf("the only %s object is the %s so the answer is %s",
                                     kColorNames[o.color], o.name().c_str(), shape_name(o.shape));
                qa.answer = shape_name(o.shape);
            }
            break;
        }

        case TaskKind::count: {
            int variant = n >= 2 ? rng.below(3) : 0;
            if (variant == 0) {
                qa.question = "how many objects are there";
                qa.conclusion = strf("counting all objects gives %d so the answer is %d", n, n);
                qa.answer = strf("%d", n);
            } else {
                const SceneObject& ref = objs[size_t(rng.below(n))];
                int k = 0;
                if (variant == 1) {
                    for (const SceneObject& o : objs)
                        if (ccol(o) < ccol(ref)) ++k;
                    qa.question = strf("how many objects are to the left of the %s", ref.name().c_str());
                    qa.conclusion = strf("the number of objects to the left of the %s is %d so the answer is %d",
                                         ref.name().c_str(), k, k);
                } else {
                    for (const SceneObject& o : objs)
                        if (o.depth < ref.depth) ++k;
                    qa.question = strf("how many objects are closer than the %s", ref.name().c_str());
                    qa.conclusion = strf("the number of objects closer than the %s is %d so the answer is %d",
                                         ref.name().c_str(), k, k);
                }
                qa.answer = strf("%d", k);
            }
            break;
        }

        case TaskKind::relative_position: {
            if (n < 2) fail_validation("relative position task needs at least two objects");
            int ia = rng.below(n);
            int ib = rng.below(n - 1);
            if (ib >= ia) ++ib;
            const SceneObject &a = objs[size_t(ia)], &b = objs[size_t(ib)];
            int variant = rng.below(4);
            // the answer never depends on the order the pair is named in
            if (variant == 0 || variant == 1) {
                bool want_near = variant == 0;
                const SceneObject& win = (a.depth < b.depth) == want_near ? a : b;
                const SceneObject& lose = (&win == &a) ? b : a;
                qa.question = strf("which is %s the %s or the %s", want_near ? "closer" : "farther",
                                   a.name().c_str(), b.name().c_str());
                qa.conclusion = strf("comparing distances %s meters is %s than %s meters so the answer is %s",
                                     depth_str(win.depth).c_str(), want_near ? "less" : "greater",
                                     depth_str(lose.depth).c_str(), win.name().c_str());
                qa.answer = win.name();
            } else {
                bool want_left = variant == 2;
                const SceneObject& win = (ccol(a) < ccol(b)) == want_left ? a : b;
                const SceneObject& lose = (&win == &a) ? b : a;
                qa.question = strf("which is more to the %s the %s or the %s",
                                   want_left ? "left" : "right", a.name().c_str(), b.name().c_str());
                qa.conclusion = strf("comparing columns column %d is %s than column %d so the answer is %s",
                                     ccol(win), want_left ? "less" : "greater", ccol(lose),
                                     win.name().c_str());
                qa.answer = win.name();
            }
            break;
        }

        case TaskKind::position_based_object: {
            if (n < 2) fail_validation("position based object task needs at least two objects");
            // relations: 0 left, 1 right, 2 above, 3 below, 4 front, 5 behind
            struct Choice {
                int rel, ref, ans;
            };
            std::vector<Choice> choices;
            for (int rel = 0; rel < 6; ++rel) {
                for (int r = 0; r < n; ++r) {
                    int best = -1;
                    for (int i = 0; i < n; ++i) {
                        if (i == r) continue;
                        const SceneObject &o = objs[size_t(i)], &ref = objs[size_t(r)];
                        bool ok = false;
                        double key = 0.0;
                        switch (rel) {
                            case 0: ok = ccol(o) < ccol(ref); key = ccol(o); break;
                            case 1: ok = ccol(o) > ccol(ref); key = -ccol(o); break;
                            case 2: ok = crow(o) < crow(ref); key = crow(o); break;
                            case 3: ok = crow(o) > crow(ref); key = -crow(o); break;
                            case 4: ok = o.depth < ref.depth; key = o.depth; break;
                            case 5: ok = o.depth > ref.depth; key = -o.depth; break;
                        }
                        if (!ok) continue;
                        // the qualifier nearest to the reference wins (largest key)
                        if (best < 0) { best = i; continue; }
                        const SceneObject& bo = objs[size_t(best)];
                        double bkey = 0.0;
                        switch (rel) {
                            case 0: bkey = ccol(bo); break;
                            case 1: bkey = -ccol(bo); break;
                            case 2: bkey = crow(bo); break;
                            case 3: bkey = -crow(bo); break;
                            case 4: bkey = bo.depth; break;
                            case 5: bkey = -bo.depth; break;
                        }
                        if (key > bkey) best = i;
                    }
                    if (best >= 0) choices.push_back({rel, r, best});
                }
            }
            if (choices.empty()) fail_validation("position based object task not applicable");
            Choice ch = choices[size_t(rng.below(int(choices.size())))];
            const SceneObject &ref = objs[size_t(ch.ref)], &ans = objs[size_t(ch.ans)];
            static const char* rel_q[6] = {"to the left of",  "to the right of", "above",
                                           "below",           "in front of",     "behind"};
            static const char* rel_c[6] = {"nearest object to the left of",
                                           "nearest object to the right of",
                                           "object just above",
                                           "object just below",
                                           "object just in front of",
                                           "object just behind"};
            qa.question = strf("what is the object %s the %s", rel_q[ch.rel], ref.name().c_str());
            qa.conclusion = strf("the %s the %s is the %s so the answer is %s", rel_c[ch.rel],
                                 ref.name().c_str(), ans.name().c_str(), ans.name().c_str());
            qa.answer = ans.name();
            break;
        }
    }
    return qa;
}

}  // namespace ssr
