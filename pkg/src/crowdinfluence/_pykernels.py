"""Pure-Python twins of the compiled kernels in ``_kernels.pyx``.

Same signatures, same uniform-consumption order, same floating-point
operation order. Arrays are copied to lists for speed and written back.
"""
import numpy as np


def reach_batch(indptr, indices, probs, roots, uniforms, members, offsets):
    ip = indptr.tolist()
    ix = indices.tolist()
    pr = probs.tolist()
    n_nodes = len(ip) - 1
    n_edges = ip[n_nodes]
    n_unif = len(uniforms)
    cap = len(members)
    stamp = [0] * n_nodes
    out = []
    offs = [0]
    k = 0
    done = len(roots)
    unif = uniforms.tolist() if isinstance(uniforms, np.ndarray) else list(uniforms)
    for i, root in enumerate(roots.tolist()):
        tail = len(out)
        if n_unif - k < n_edges or cap - tail < n_nodes:
            done = i
            break
        head = tail
        out.append(root)
        mark = i + 1
        stamp[root] = mark
        while head < len(out):
            v = out[head]
            head += 1
            for e in range(ip[v], ip[v + 1]):
                u = ix[e]
                if stamp[u] != mark:
                    r = unif[k]
                    k += 1
                    if r < pr[e]:
                        stamp[u] = mark
                        out.append(u)
        offs.append(len(out))
    members[: len(out)] = out
    offsets[: len(offs)] = offs
    return done, k


def lda_train_sweep(doc_of, words, z, ndt, ntw, nt, alpha, beta, vbeta, uniforms):
    docs = doc_of.tolist()
    ws = words.tolist()
    zz = z.tolist()
    dt = ndt.tolist()
    tw = ntw.tolist()
    tt = nt.tolist()
    unif = uniforms.tolist()
    n_top = len(tt)
    cum = [0.0] * n_top
    for i in range(len(ws)):
        d = docs[i]
        w = ws[i]
        k = zz[i]
        row = dt[d]
        row[k] -= 1
        tw[k][w] -= 1
        tt[k] -= 1
        total = 0.0
        for t in range(n_top):
            total += (row[t] + alpha) * (tw[t][w] + beta) / (tt[t] + vbeta)
            cum[t] = total
        u = unif[i] * total
        k = n_top - 1
        for t in range(n_top):
            if u < cum[t]:
                k = t
                break
        zz[i] = k
        row[k] += 1
        tw[k][w] += 1
        tt[k] += 1
    z[:] = zz
    ndt[:] = dt
    ntw[:] = tw
    nt[:] = tt


def lda_infer_sweep(words, z, ndk, phi, alpha, uniforms, accum):
    ws = words.tolist()
    zz = z.tolist()
    nk = ndk.tolist()
    ph = phi.tolist()
    unif = uniforms.tolist()
    acc = accum.tolist()
    n_top = len(nk)
    p = [0.0] * n_top
    for i in range(len(ws)):
        w = ws[i]
        k = zz[i]
        nk[k] -= 1
        total = 0.0
        for t in range(n_top):
            p[t] = (nk[t] + alpha) * ph[t][w]
            total += p[t]
        for t in range(n_top):
            acc[t] += p[t] / total
        u = unif[i] * total
        k = n_top - 1
        run = 0.0
        for t in range(n_top):
            run += p[t]
            if u < run:
                k = t
                break
        zz[i] = k
        nk[k] += 1
    z[:] = zz
    ndk[:] = nk
    accum[:] = acc
