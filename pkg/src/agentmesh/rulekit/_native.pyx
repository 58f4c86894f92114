# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled twin of the pure join kernel.

Must stay observably identical to kernel.py_match_all /
py_match_with_pinned; the equivalence tests run both backends over the
same stores. Value comparisons go through PyObject richcompare, so
Symbol/str/int/float semantics match the pure path exactly.
"""

cdef object _UNBOUND = object()


cdef inline bint _numeric(object v):
    if v is True or v is False:
        return False
    return isinstance(v, int) or isinstance(v, float)


cdef bint _cmp(Py_ssize_t code, object v, object w) except? -1:
    if code == 0:
        return v == w
    if code == 1:
        return v != w
    if not (_numeric(v) and _numeric(w)):
        return False
    if code == 2:
        return v < w
    if code == 3:
        return v <= w
    if code == 4:
        return v > w
    return v >= w


cdef int _rec(tuple patterns, dict store, list binds, list fids, list out,
              Py_ssize_t i, Py_ssize_t pin_pos, long pin_fid,
              object pin_fid_obj, object pin_vals) except -1:
    cdef Py_ssize_t npat = len(patterns)
    cdef tuple pat, checks, chk
    cdef object template, obj, v, operand, fid_obj, vals_obj
    cdef dict facts
    cdef long skip, fid
    cdef Py_ssize_t slot, opc, code, oix
    cdef list undo
    cdef bint ok

    if i == npat:
        out.append((tuple(fids), tuple(binds)))
        return 0
    pat = <tuple> patterns[i]
    template = pat[0]
    checks = <tuple> pat[1]
    skip = pin_fid if i < pin_pos else -1

    if i == pin_pos:
        candidates = ((pin_fid_obj, pin_vals),)
    else:
        obj = store.get(template)
        if obj is None:
            return 0
        facts = <dict> obj
        if len(facts) == 0:
            return 0
        candidates = facts.items()

    for fid_obj, vals_obj in candidates:
        fid = fid_obj
        if fid == skip:
            continue
        undo = []
        ok = True
        for chk_obj in checks:
            chk = <tuple> chk_obj
            slot = chk[0]
            opc = chk[1]
            code = chk[2]
            operand = chk[3]
            v = (<tuple> vals_obj)[slot]
            if opc == 0:  # LIT
                if v != operand:
                    ok = False
                    break
            elif opc == 1:  # BIND
                oix = operand
                binds[oix] = v
                undo.append(oix)
            elif opc == 2:  # VEQ
                oix = operand
                if v != binds[oix]:
                    ok = False
                    break
            elif opc == 3:  # TLIT
                if not _cmp(code, v, operand):
                    ok = False
                    break
            else:  # TVAR
                oix = operand
                if not _cmp(code, v, binds[oix]):
                    ok = False
                    break
        if ok:
            fids[i] = fid_obj
            _rec(patterns, store, binds, fids, out, i + 1,
                 pin_pos, pin_fid, pin_fid_obj, pin_vals)
        for oix_obj in undo:
            binds[<Py_ssize_t> oix_obj] = _UNBOUND
    return 0


def match_all(crule, dict store):
    cdef tuple patterns = <tuple> crule.patterns
    cdef list out = []
    cdef list binds = [_UNBOUND] * <Py_ssize_t> crule.nvars
    cdef list fids = [0] * len(patterns)
    _rec(patterns, store, binds, fids, out, 0, -1, -1, None, None)
    return out


def match_with_pinned(crule, dict store, Py_ssize_t pos, long fid, vals):
    cdef tuple patterns = <tuple> crule.patterns
    cdef list out = []
    cdef list binds = [_UNBOUND] * <Py_ssize_t> crule.nvars
    cdef list fids = [0] * len(patterns)
    _rec(patterns, store, binds, fids, out, 0, pos, fid, fid, vals)
    return out
