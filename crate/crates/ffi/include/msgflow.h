#ifndef MSGFLOW_H
#define MSGFLOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call. Codes 1 to 4 match the command-line exit codes.
typedef enum MsgflowStatus {
  MSGFLOW_STATUS_OK = 0,
  MSGFLOW_STATUS_ERROR = 1,
  MSGFLOW_STATUS_PARSE = 2,
  MSGFLOW_STATUS_SYNC = 3,
  MSGFLOW_STATUS_SEED = 4,
  MSGFLOW_STATUS_INVALID_ARGUMENT = 5,
  MSGFLOW_STATUS_PANIC = 6,
} MsgflowStatus;

typedef enum MsgflowSyncMode {
  MSGFLOW_SYNC_MODE_PAIRS = 0,
  MSGFLOW_SYNC_MODE_ASSUME_SYNCHRONIZED = 1,
} MsgflowSyncMode;

typedef enum MsgflowDirection {
  MSGFLOW_DIRECTION_FORWARD = 0,
  MSGFLOW_DIRECTION_BACKWARD = 1,
  MSGFLOW_DIRECTION_BOTH = 2,
} MsgflowDirection;

typedef enum MsgflowFlowFormat {
  MSGFLOW_FLOW_FORMAT_DOT = 0,
  MSGFLOW_FLOW_FORMAT_JSON = 1,
  MSGFLOW_FLOW_FORMAT_SVG_TIMELINE = 2,
} MsgflowFlowFormat;

typedef enum MsgflowTimelineFormat {
  MSGFLOW_TIMELINE_FORMAT_SVG = 0,
  MSGFLOW_TIMELINE_FORMAT_JSON = 1,
} MsgflowTimelineFormat;

// An analyzed trace bundle.
typedef struct MsgflowDocument MsgflowDocument;

// A message flow traced from one seed.
typedef struct MsgflowFlow MsgflowFlow;

typedef struct MsgflowLinkCounts {
  size_t transport;
  size_t direct;
  size_t indirect;
} MsgflowLinkCounts;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failure on this thread, or NULL after a success.
// The pointer stays valid until the next msgflow call on the same thread.
const char *msgflow_last_error(void);

// Library version as a static NUL-terminated string.
const char *msgflow_version(void);

// Loads `count` JSONL trace files and runs the analysis.
//
// `reference_host` may be NULL to use the lexicographically smallest host.
//
// # Safety
// `paths` must point to `count` valid C strings; `out` must be writable.
enum MsgflowStatus msgflow_analyze_files(const char *const *paths,
                                         size_t count,
                                         enum MsgflowSyncMode sync_mode,
                                         const char *reference_host,
                                         int64_t min_one_way_delay_ns,
                                         struct MsgflowDocument **out);

// Parses a serialized analysis document.
//
// # Safety
// `json` must be a valid C string; `out` must be writable.
enum MsgflowStatus msgflow_document_from_json(const char *json, struct MsgflowDocument **out);

// Serializes the document; free the result with [`msgflow_string_free`].
//
// # Safety
// `doc` must be a live handle; `out` must be writable.
enum MsgflowStatus msgflow_document_to_json(const struct MsgflowDocument *doc, char **out);

// # Safety
// `doc` must be a live handle; `out` must be writable.
enum MsgflowStatus msgflow_document_link_counts(const struct MsgflowDocument *doc,
                                                struct MsgflowLinkCounts *out);

// Number of diagnostics recorded while building the document.
//
// # Safety
// `doc` must be a live handle or NULL.
size_t msgflow_document_diagnostic_count(const struct MsgflowDocument *doc);

// # Safety
// `doc` must be NULL or a handle not yet freed.
void msgflow_document_free(struct MsgflowDocument *doc);

// Traces the flow through the publication on `topic` with `source_timestamp`.
//
// # Safety
// `doc` must be a live handle, `topic` a valid C string, `out` writable.
enum MsgflowStatus msgflow_flow_from_publication(const struct MsgflowDocument *doc,
                                                 const char *topic,
                                                 int64_t source_timestamp,
                                                 enum MsgflowDirection dir,
                                                 struct MsgflowFlow **out);

// Traces the flow through the `index`-th callback of `owner`.
//
// # Safety
// `doc` must be a live handle, `owner` a valid C string, `out` writable.
enum MsgflowStatus msgflow_flow_from_callback(const struct MsgflowDocument *doc,
                                              const char *owner,
                                              uint32_t index,
                                              enum MsgflowDirection dir,
                                              struct MsgflowFlow **out);

// Traces the flow through the callback of `owner` running at reference time `ts`.
//
// # Safety
// `doc` must be a live handle, `owner` a valid C string, `out` writable.
enum MsgflowStatus msgflow_flow_from_callback_at(const struct MsgflowDocument *doc,
                                                 const char *owner,
                                                 int64_t ts,
                                                 enum MsgflowDirection dir,
                                                 struct MsgflowFlow **out);

// Number of edges in the flow graph.
//
// # Safety
// `flow` must be a live handle or NULL.
size_t msgflow_flow_edge_count(const struct MsgflowFlow *flow);

// Number of leaves with an end-to-end latency.
//
// # Safety
// `flow` must be a live handle or NULL.
size_t msgflow_flow_leaf_count(const struct MsgflowFlow *flow);

// End-to-end latency of the `i`-th leaf, in leaf order of the latency table.
//
// # Safety
// `flow` must be a live handle; `latency_ns` must be writable.
enum MsgflowStatus msgflow_flow_leaf_latency(const struct MsgflowFlow *flow,
                                             size_t i,
                                             int64_t *latency_ns);

// Renders the flow; `px_per_ms` and `lane_height` apply to the SVG timeline only.
//
// # Safety
// `flow` must be a live handle; `out` must be writable.
enum MsgflowStatus msgflow_flow_export(const struct MsgflowFlow *flow,
                                       enum MsgflowFlowFormat format,
                                       double px_per_ms,
                                       uint32_t lane_height,
                                       char **out);

// # Safety
// `flow` must be NULL or a handle not yet freed.
void msgflow_flow_free(struct MsgflowFlow *flow);

// Earliest and latest executor timestamps in the document.
//
// # Safety
// `doc` must be a live handle; `from` and `to` must be writable.
enum MsgflowStatus msgflow_document_window(const struct MsgflowDocument *doc,
                                           int64_t *from,
                                           int64_t *to);

// Renders the executor state timeline over `[from, to]`.
//
// # Safety
// `doc` must be a live handle; `out` must be writable.
enum MsgflowStatus msgflow_executor_export(const struct MsgflowDocument *doc,
                                           int64_t from,
                                           int64_t to,
                                           enum MsgflowTimelineFormat format,
                                           double px_per_ms,
                                           uint32_t lane_height,
                                           char **out);

// Releases a string returned by this library.
//
// # Safety
// `s` must be NULL or a string returned by msgflow and not yet freed.
void msgflow_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MSGFLOW_H */
