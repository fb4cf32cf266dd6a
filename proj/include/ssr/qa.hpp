#pragma once

#include <string>
#include <vector>

#include "ssr/scene.hpp"

namespace ssr {

enum class TaskKind { count, relative_position, position_based_object, existence, attribute };

const char* task_category(TaskKind t);  // "spatial" or "general"
const char* task_subtask(TaskKind t);   // lowercase subtask label
bool task_is_spatial(TaskKind t);
std::vector<TaskKind> all_tasks();
TaskKind task_from_subtask(const std::string& subtask);

// One generated question. The rationale is templated: a facts section citing
// every object's color, shape, pixel position and depth in meters, then a
// conclusion sentence ending in "so the answer is ...". All text is lowercase
// and punctuation-free so the word tokenizer covers it exactly.
struct QaItem {
    TaskKind task = TaskKind::existence;
    std::string question;
    std::string facts;
    std::string conclusion;
    std::string answer;

    std::string rationale() const { return facts + " " + conclusion; }
};

// Deterministic in (scene, task, seed). Throws ValidationError when the scene
// cannot host the task (e.g. pair questions need two objects).
QaItem make_qa(const Scene& scene, TaskKind task, uint64_t seed);

}  // namespace ssr
