/*
 * Toy DPLL solver.
 *
 * usage: solver_binary <instance.cnf> [<proof.drat>]
 *
 * Prints `s SATISFIABLE` with `v` lines (exit 10), `s UNSATISFIABLE`
 * (exit 20) or `s UNKNOWN` once the decision budget is spent (exit 0).
 * Every failed search node emits the negation of its decision stack as a
 * DRAT lemma; the root failure emits the empty clause.
 */
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

/* search gives up after this many decisions */
#define DECISION_BUDGET 1000000L

/* 0: lowest unassigned variable, 1: most occurrences first */
#define BRANCH_HEURISTIC 0

enum { RESULT_UNSAT = 0, RESULT_SAT = 1, RESULT_UNKNOWN = 2 };

static int num_vars;
static int num_clauses;
static int *lits;          /* clause literals, clause c is lits[cstart[c] .. cstart[c + 1]) */
static int *cstart;
static signed char *val;   /* per variable: 0 unassigned, 1 true, -1 false */
static int *trail;
static int trail_len;
static int *stack;         /* decision literals, outermost first */
static int depth;
static long *occ;
static long decisions;
static FILE *proof;

static void die(const char *msg)
{
    fprintf(stderr, "c error: %s\n", msg);
    exit(1);
}

static void *xrealloc(void *p, size_t n)
{
    void *q = realloc(p, n ? n : 1);
    if (!q)
        die("out of memory");
    return q;
}

static void parse(const char *path)
{
    FILE *f = fopen(path, "r");
    if (!f)
        die("cannot open instance");
    size_t cap = 1024, len = 0, ccap = 64;
    int declared_vars = 0, declared_clauses = 0, header = 0, c;
    lits = xrealloc(NULL, cap * sizeof *lits);
    cstart = xrealloc(NULL, ccap * sizeof *cstart);
    cstart[0] = 0;
    num_clauses = 0;
    while ((c = fgetc(f)) != EOF) {
        if (c == 'c') {
            while ((c = fgetc(f)) != EOF && c != '\n')
                ;
            continue;
        }
        if (c == 'p') {
            if (fscanf(f, " cnf %d %d", &declared_vars, &declared_clauses) != 2)
                die("bad header");
            header = 1;
            continue;
        }
        if (c == '%')
            break;
        if (c == '-' || (c >= '0' && c <= '9')) {
            ungetc(c, f);
            int lit;
            if (fscanf(f, "%d", &lit) != 1)
                die("bad literal");
            if (!header)
                die("literal before header");
            if (abs(lit) > declared_vars)
                die("literal out of range");
            if (len + 1 >= cap) {
                cap *= 2;
                lits = xrealloc(lits, cap * sizeof *lits);
            }
            if (lit == 0) {
                if ((size_t)num_clauses + 2 >= ccap) {
                    ccap *= 2;
                    cstart = xrealloc(cstart, ccap * sizeof *cstart);
                }
                num_clauses++;
                cstart[num_clauses] = (int)len;
            } else {
                lits[len++] = lit;
            }
        }
    }
    fclose(f);
    if (!header)
        die("missing header");
    num_vars = declared_vars;
}

static int lit_value(int lit)
{
    int v = val[abs(lit)];
    return lit > 0 ? v : -v;
}

static void assign(int lit)
{
    val[abs(lit)] = lit > 0 ? 1 : -1;
    trail[trail_len++] = lit;
}

static void undo(int mark)
{
    while (trail_len > mark)
        val[abs(trail[--trail_len])] = 0;
}

/* naive unit propagation; returns 0 on conflict */
static int propagate(void)
{
    int changed = 1;
    while (changed) {
        changed = 0;
        for (int c = 0; c < num_clauses; c++) {
            int open = 0, last = 0, sat = 0;
            for (int k = cstart[c]; k < cstart[c + 1]; k++) {
                int v = lit_value(lits[k]);
                if (v > 0) {
                    sat = 1;
                    break;
                }
                if (v == 0) {
                    open++;
                    last = lits[k];
                }
            }
            if (sat)
                continue;
            if (open == 0)
                return 0;
            if (open == 1) {
                assign(last);
                changed = 1;
            }
        }
    }
    return 1;
}

static int pick_var(void)
{
    int best = 0;
    for (int v = 1; v <= num_vars; v++) {
        if (val[v] != 0)
            continue;
        if (BRANCH_HEURISTIC == 0)
            return v;
        if (best == 0 || occ[v] > occ[best])
            best = v;
    }
    return best;
}

/* the decisions on the stack cannot all hold */
static void fail_node(void)
{
    if (!proof)
        return;
    for (int i = 0; i < depth; i++)
        fprintf(proof, "%d ", -stack[i]);
    fprintf(proof, "0\n");
}

static int dpll(void)
{
    int mark = trail_len;
    if (!propagate()) {
        fail_node();
        undo(mark);
        return RESULT_UNSAT;
    }
    int v = pick_var();
    if (v == 0)
        return RESULT_SAT;
    if (++decisions > DECISION_BUDGET)
        return RESULT_UNKNOWN;
    for (int phase = 0; phase < 2; phase++) {
        int lit = phase == 0 ? v : -v;
        int before = trail_len;
        stack[depth++] = lit;
        assign(lit);
        int r = dpll();
        depth--;
        if (r != RESULT_UNSAT)
            return r;
        undo(before);
    }
    fail_node();
    undo(mark);
    return RESULT_UNSAT;
}

static void print_model(void)
{
    printf("v");
    for (int v = 1; v <= num_vars; v++) {
        printf(" %d", val[v] > 0 ? v : -v);
        if (v % 20 == 0)
            printf("\nv");
    }
    printf(" 0\n");
}

int main(int argc, char **argv)
{
    if (argc < 2) {
        fprintf(stderr, "usage: %s <instance.cnf> [<proof.drat>]\n", argv[0]);
        return 1;
    }
    parse(argv[1]);
    if (argc > 2) {
        proof = fopen(argv[2], "w");
        if (!proof)
            die("cannot open proof file");
    }
    val = xrealloc(NULL, (size_t)(num_vars + 1) * sizeof *val);
    memset(val, 0, (size_t)(num_vars + 1) * sizeof *val);
    trail = xrealloc(NULL, (size_t)(num_vars + 1) * sizeof *trail);
    stack = xrealloc(NULL, (size_t)(num_vars + 1) * sizeof *stack);
    occ = xrealloc(NULL, (size_t)(num_vars + 1) * sizeof *occ);
    memset(occ, 0, (size_t)(num_vars + 1) * sizeof *occ);
    for (int k = 0; k < cstart[num_clauses]; k++)
        occ[abs(lits[k])]++;

    int result = dpll();

    if (proof)
        fclose(proof);
    if (result == RESULT_SAT) {
        printf("s SATISFIABLE\n");
        print_model();
        fflush(stdout);
        return 10;
    }
    if (result == RESULT_UNSAT) {
        printf("s UNSATISFIABLE\n");
        fflush(stdout);
        return 20;
    }
    printf("c decision budget exhausted after %ld decisions\n", decisions);
    printf("s UNKNOWN\n");
    return 0;
}
