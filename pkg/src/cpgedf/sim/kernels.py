"""Tick loop of the CP-GEDF simulator.

Written in the numba-compatible subset of Python. With numba disabled the same
function runs interpreted over numpy arrays; ``run_cpgedf.py_func`` is always
the interpreted version.

Indexing: ``g`` is a global subtask id (task-major, subtasks in index order),
``k`` a dag-job row (task-major, release order) and ``inst = job_sub_off[k] +
local`` a sub-job.
"""

import numpy as np

from .._jit import njit


@njit(cache=True)
def run_cpgedf(m, horizon, sub_off, wcet, cp_flag, pred_cnt, succ_ptr, succ_idx,
               task_rank, job_task, job_release, job_deadline, job_sub_off,
               task_job_ptr, lazy):
    n_tasks = sub_off.shape[0] - 1
    n_jobs = job_task.shape[0]
    n_inst = job_sub_off[n_jobs]
    max_sub = 1
    for i in range(n_tasks):
        max_sub = max(max_sub, sub_off[i + 1] - sub_off[i])
    span_cp = max_sub
    span_rank = 2 * span_cp
    span_dl = n_tasks * span_rank

    remaining = np.empty(n_inst, np.int64)
    npred = np.empty(n_inst, np.int64)
    ready_at = np.full(n_inst, -1, np.int64)
    inst_job = np.empty(n_inst, np.int64)
    inst_g = np.empty(n_inst, np.int64)
    for k in range(n_jobs):
        i = job_task[k]
        for local in range(sub_off[i + 1] - sub_off[i]):
            inst = job_sub_off[k] + local
            g = sub_off[i] + local
            remaining[inst] = wcet[g]
            npred[inst] = pred_cnt[g]
            inst_job[inst] = k
            inst_g[inst] = g
    job_left = np.empty(n_jobs, np.int64)
    for k in range(n_jobs):
        i = job_task[k]
        job_left[k] = sub_off[i + 1] - sub_off[i]
    job_act = np.full(n_jobs, -1, np.int64)
    job_done = np.full(n_jobs, -1, np.int64)
    task_cur = task_job_ptr[:-1].copy()

    assign = np.full((horizon, m), -1, np.int32)
    n_total_sub = sub_off[n_tasks]
    cand = np.empty(n_total_sub, np.int64)
    keys = np.empty(n_total_sub, np.int64)
    chosen_stamp = np.full(n_inst, -1, np.int64)
    placed_stamp = np.full(n_inst, -1, np.int64)
    chosen = np.empty(m, np.int64)

    for t in range(horizon):
        # dag-job activation: released and predecessor dag-job complete
        for i in range(n_tasks):
            k = task_cur[i]
            if k < task_job_ptr[i + 1] and job_act[k] < 0 and job_release[k] <= t:
                job_act[k] = t
                for local in range(sub_off[i + 1] - sub_off[i]):
                    inst = job_sub_off[k] + local
                    if npred[inst] == 0:
                        ready_at[inst] = t

        c = 0
        for i in range(n_tasks):
            k = task_cur[i]
            if k >= task_job_ptr[i + 1] or job_act[k] < 0:
                continue
            base = job_deadline[k] * span_dl + task_rank[i] * span_rank
            for local in range(sub_off[i + 1] - sub_off[i]):
                inst = job_sub_off[k] + local
                if remaining[inst] > 0 and ready_at[inst] >= 0 and ready_at[inst] <= t:
                    cp_bit = 0
                    if lazy and cp_flag[sub_off[i] + local]:
                        cp_bit = 1
                    cand[c] = inst
                    keys[c] = base + cp_bit * span_cp + local
                    c += 1
        if c == 0:
            continue

        # chosen[] ends up in priority order; new placements follow it
        n_run = c if c < m else m
        order = np.argsort(keys[:c])
        for q in range(n_run):
            chosen[q] = cand[order[q]]
        for q in range(n_run):
            chosen_stamp[chosen[q]] = t

        # sticky processors for continuing sub-jobs, lowest free index otherwise
        if t > 0:
            for p in range(m):
                prev = assign[t - 1, p]
                if prev >= 0 and chosen_stamp[prev] == t:
                    assign[t, p] = prev
                    placed_stamp[prev] = t
        p = 0
        for q in range(n_run):
            inst = chosen[q]
            if placed_stamp[inst] == t:
                continue
            while assign[t, p] >= 0:
                p += 1
            assign[t, p] = inst
            placed_stamp[inst] = t

        for q in range(n_run):
            inst = chosen[q]
            remaining[inst] -= 1
            if remaining[inst] > 0:
                continue
            k = inst_job[inst]
            g = inst_g[inst]
            i = job_task[k]
            for e in range(succ_ptr[g], succ_ptr[g + 1]):
                nxt = job_sub_off[k] + succ_idx[e]
                npred[nxt] -= 1
                if npred[nxt] == 0:
                    ready_at[nxt] = t + 1
            job_left[k] -= 1
            if job_left[k] == 0:
                job_done[k] = t + 1
                task_cur[i] += 1

    return assign, job_act, job_done
