#ifndef HOPMAP_H
#define HOPMAP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum HopmapStatus {
  HOPMAP_STATUS_OK = 0,
  HOPMAP_STATUS_NULL_POINTER = 1,
  HOPMAP_STATUS_INVALID_INPUT = 2,
  HOPMAP_STATUS_QUERY_FAILED = 3,
  HOPMAP_STATUS_PLANNING_FAILED = 4,
  HOPMAP_STATUS_IO = 5,
  HOPMAP_STATUS_PANIC = 6,
} HopmapStatus;

typedef enum HopmapIntraMode {
  HOPMAP_INTRA_MODE_DELAUNAY = 0,
  HOPMAP_INTRA_MODE_COMPLETE = 1,
} HopmapIntraMode;

typedef enum HopmapEdgeKind {
  HOPMAP_EDGE_KIND_INTRA = 0,
  HOPMAP_EDGE_KIND_INTER = 1,
} HopmapEdgeKind;

typedef enum HopmapStrategy {
  HOPMAP_STRATEGY_INTRA_DT = 0,
  HOPMAP_STRATEGY_INTRA_ALL = 1,
  HOPMAP_STRATEGY_DA_ALL = 2,
} HopmapStrategy;

typedef struct HopmapFrameSet HopmapFrameSet;

typedef struct HopmapMap HopmapMap;

typedef struct HopmapPlan HopmapPlan;

// Map construction parameters. Inter-image matching searches frame gaps
// `1..=window_max`.
typedef struct HopmapGraphConfig {
  double theta;
  uint32_t window_max;
  enum HopmapIntraMode intra_mode;
  uint32_t l_max;
  bool renormalize_layers;
  bool pano_wrap;
} HopmapGraphConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *hopmap_last_error(void);

// Library version as a static NUL-terminated string.
const char *hopmap_version(void);

// Loads an ingest file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum HopmapStatus hopmap_frameset_load(const char *path, struct HopmapFrameSet **out);

// Parses ingest text held in memory.
//
// # Safety
// `text` must be a NUL-terminated string and `out` a valid pointer.
enum HopmapStatus hopmap_frameset_parse(const char *text, struct HopmapFrameSet **out);

// # Safety
// `fs` must come from this library and not be used afterwards; null is ignored.
void hopmap_frameset_free(struct HopmapFrameSet *fs);

// # Safety
// `fs` must be a valid handle or null (which yields 0).
uintptr_t hopmap_frameset_num_frames(const struct HopmapFrameSet *fs);

// # Safety
// `fs` must be a valid handle or null (which yields 0).
uintptr_t hopmap_frameset_num_records(const struct HopmapFrameSet *fs);

struct HopmapGraphConfig hopmap_graph_config_default(void);

// Builds a map. A null `config` means defaults.
//
// # Safety
// `fs` must be a valid handle, `config` valid or null, `out` a valid pointer.
enum HopmapStatus hopmap_map_build(const struct HopmapFrameSet *fs,
                                   const struct HopmapGraphConfig *config,
                                   struct HopmapMap **out);

// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum HopmapStatus hopmap_map_load(const char *path, struct HopmapMap **out);

// # Safety
// `map` must be a valid handle and `path` a NUL-terminated string.
enum HopmapStatus hopmap_map_save(const struct HopmapMap *map, const char *path);

// # Safety
// `map` must come from this library and not be used afterwards; null is ignored.
void hopmap_map_free(struct HopmapMap *map);

// # Safety
// `map` must be a valid handle or null (which yields 0).
uintptr_t hopmap_map_num_nodes(const struct HopmapMap *map);

// # Safety
// `map` must be a valid handle or null (which yields 0).
uintptr_t hopmap_map_num_frames(const struct HopmapMap *map);

// # Safety
// `map` must be a valid handle or null (which yields 0).
uintptr_t hopmap_map_num_edges(const struct HopmapMap *map, enum HopmapEdgeKind kind);

// Frame that node `node` was observed in.
//
// # Safety
// `map` must be a valid handle and `out_frame` a valid pointer.
enum HopmapStatus hopmap_map_node_frame(const struct HopmapMap *map,
                                        uintptr_t node,
                                        uintptr_t *out_frame);

// Minimum-hop plan from `source` to `target`.
//
// # Safety
// `map` must be a valid handle and `out` a valid pointer.
enum HopmapStatus hopmap_plan(const struct HopmapMap *map,
                              uintptr_t source,
                              uintptr_t target,
                              enum HopmapStrategy strat,
                              struct HopmapPlan **out);

// # Safety
// `plan` must come from this library and not be used afterwards; null is ignored.
void hopmap_plan_free(struct HopmapPlan *plan);

// Number of nodes on the plan, endpoints included.
//
// # Safety
// `plan` must be a valid handle or null (which yields 0).
uintptr_t hopmap_plan_len(const struct HopmapPlan *plan);

// Number of intra-image edges on the plan.
//
// # Safety
// `plan` must be a valid handle or null (which yields 0).
uint32_t hopmap_plan_cost(const struct HopmapPlan *plan);

// Pointer to the plan's `hopmap_plan_len` node ids, owned by the plan.
//
// # Safety
// `plan` must be a valid handle or null (which yields null).
const uintptr_t *hopmap_plan_steps(const struct HopmapPlan *plan);

// Top-`k` nodes by semantic similarity to a text embedding. Writes up to
// `capacity` node ids and similarities and the number written.
//
// # Safety
// `vector` must point to `dim` doubles; `out_nodes` and `out_sims` to
// `capacity` elements each; `out_count` must be valid.
enum HopmapStatus hopmap_resolve_text(const struct HopmapMap *map,
                                      const double *vector,
                                      uintptr_t dim,
                                      uintptr_t k,
                                      uintptr_t *out_nodes,
                                      double *out_sims,
                                      uintptr_t capacity,
                                      uintptr_t *out_count);

// Localizes frame `frame_index` of a query frame set: segments matched at
// `layer` above `theta_loc` vote for a map frame. `out_frame` receives the
// frame, or -1 when nothing matched.
//
// # Safety
// `map` and `query` must be valid handles and `out_frame` a valid pointer.
enum HopmapStatus hopmap_localize(const struct HopmapMap *map,
                                  const struct HopmapFrameSet *query,
                                  uintptr_t frame_index,
                                  uint32_t layer,
                                  double theta_loc,
                                  int64_t *out_frame);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HOPMAP_H */
