/* Build:  cargo build -p densedex-ffi --release
 *         cc -I crates/ffi/include crates/ffi/examples/smoke.c \
 *            target/release/libdensedex_ffi.a -lpthread -ldl -lm -o smoke
 * Run:    ./smoke <index-dir> <dim>
 */
#include <stdio.h>
#include <stdlib.h>

#include "densedex.h"

int main(int argc, char **argv) {
    if (argc < 3) {
        fprintf(stderr, "usage: %s <index-dir> <dim>\n", argv[0]);
        return 2;
    }
    DdxIndex *index = NULL;
    if (ddx_index_open(argv[1], &index) != DDX_STATUS_OK) {
        fprintf(stderr, "open failed: %s\n", ddx_last_error());
        return 1;
    }
    DdxIndexStats stats;
    ddx_index_stats(index, &stats);
    printf("docs=%llu terms=%llu bytes=%llu\n", (unsigned long long)stats.num_docs,
           (unsigned long long)stats.distinct_terms, (unsigned long long)stats.bytes_on_disk);

    size_t dim = (size_t)atoi(argv[2]);
    double *query = calloc(dim, sizeof(double));
    for (size_t i = 0; i < dim; i++) query[i] = (double)((i * 7919) % 13) - 6.0;

    DdxResults *results = NULL;
    if (ddx_index_search(index, query, dim, 5, &results) != DDX_STATUS_OK) {
        fprintf(stderr, "search failed: %s\n", ddx_last_error());
        free(query);
        ddx_index_free(index);
        return 1;
    }
    for (size_t i = 0; i < ddx_results_len(results); i++) {
        printf("%zu %s %.6f\n", i + 1, ddx_results_id(results, i), ddx_results_score(results, i));
    }
    ddx_results_free(results);
    free(query);
    ddx_index_free(index);
    return 0;
}
