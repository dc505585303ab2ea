# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled data plane.

Mirrors ``edgesim.simulation.Simulation`` handler for handler: same event
kinds, same scheduling order, same RNG draws. The autoscaler and placement
logic stay in Python and are called on ticks only.
"""

from libc.stdint cimport int64_t, int32_t, int8_t
from libc.stdlib cimport malloc, realloc, free
from libc.string cimport memmove

# must match edgesim.kernel.EventKind and the constants in simulation.py / cluster.py
cdef enum:
    K_MESSAGE_ARRIVAL = 0
    K_SERVICE_COMPLETE = 1
    K_AUTOSCALER_TICK = 2
    K_REPLICA_READY = 3
    K_REQUEST_TIMEOUT = 4
    K_USER_ISSUE = 5
    K_RUN_END = 6
    K_INGRESS_DONE = 7
    HOP_REQ_HEAD = 0
    HOP_REQ_WORKER = 1
    HOP_RESP_HEAD = 2
    HOP_RESP_TESTER = 3
    HOP_SAMPLE = 4
    TICK_PERIODIC = 0
    TICK_POKE = 1
    PROVISIONING = 0
    READY = 1
    TERMINATING = 2
    REMOVED = 3
    O_PENDING = 0
    O_SUCCESS = 1
    O_TIMEOUT = 2
    O_DROPPED = 3
    HEADNODE = 0
    ACTIVATOR = -1


ctypedef struct Ev:
    int64_t t
    int64_t seq
    int64_t payload
    int32_t kind
    int32_t aux


cdef inline bint ev_less(Ev* a, Ev* b) nogil:
    return a.t < b.t or (a.t == b.t and a.seq < b.seq)


cdef void* grow(void* ptr, Py_ssize_t* cap, Py_ssize_t need, size_t item) except NULL:
    cdef Py_ssize_t new_cap = cap[0] if cap[0] > 0 else 64
    while new_cap < need:
        new_cap *= 2
    cdef void* out = realloc(ptr, new_cap * item)
    if out == NULL:
        raise MemoryError()
    cap[0] = new_cap
    return out


cdef class FastRun:
    # timing
    cdef int64_t duration_us, timeout_us, service_us, cold_start_us, ingress_us, tick_us
    cdef int64_t now, seq, processed
    cdef bint autoscaling, poke_pending, tracing
    cdef int hard_limit, max_replicas, n_links

    # event heap and the timeout lane (constant delay, so already sorted)
    cdef Ev* heap
    cdef Py_ssize_t heap_n, heap_cap
    cdef Ev* lane
    cdef Py_ssize_t lane_head, lane_n, lane_cap

    # requests
    cdef int64_t* req_issued
    cdef int32_t* req_user
    cdef int32_t* req_served
    cdef int8_t* req_outcome
    cdef int8_t* req_lost
    cdef Py_ssize_t req_n, req_cap

    # replicas (indexed by id) and the ascending list of live ids
    cdef int32_t* rep_node
    cdef int32_t* rep_state
    cdef int64_t* rep_in_flight
    cdef int64_t* rep_assigned
    cdef int64_t* rep_area
    cdef int64_t* rep_changed
    cdef int64_t* rep_from
    cdef Py_ssize_t rep_n, rep_cap
    cdef int32_t* live
    cdef Py_ssize_t live_n, live_cap
    cdef int ready_count, prov_count

    # ingress
    cdef int64_t backlog, ingress_free_at
    cdef int64_t* buf
    cdef Py_ssize_t buf_head, buf_n, buf_cap

    # links: 0 = access, w = intra link to worker w
    cdef int64_t* link_delay
    cdef int64_t* link_jitter
    cdef double* link_loss
    cdef list link_rngs

    # metrics
    cdef int64_t successes, timeouts, drops, area
    cdef int64_t* lat
    cdef Py_ssize_t lat_n, lat_cap

    # python side
    cdef object kpa
    cdef object plan_scale
    cdef list node_order
    cdef dict pending_samples
    cdef int64_t next_sample_id
    cdef public list timeline
    cdef public list trace
    cdef int n_users

    def __cinit__(self):
        self.heap = NULL
        self.lane = NULL
        self.req_issued = NULL
        self.req_user = NULL
        self.req_served = NULL
        self.req_outcome = NULL
        self.req_lost = NULL
        self.rep_node = NULL
        self.rep_state = NULL
        self.rep_in_flight = NULL
        self.rep_assigned = NULL
        self.rep_area = NULL
        self.rep_changed = NULL
        self.rep_from = NULL
        self.live = NULL
        self.buf = NULL
        self.link_delay = NULL
        self.link_jitter = NULL
        self.link_loss = NULL
        self.lat = NULL

    def __dealloc__(self):
        free(self.heap)
        free(self.lane)
        free(self.req_issued)
        free(self.req_user)
        free(self.req_served)
        free(self.req_outcome)
        free(self.req_lost)
        free(self.rep_node)
        free(self.rep_state)
        free(self.rep_in_flight)
        free(self.rep_assigned)
        free(self.rep_area)
        free(self.rep_changed)
        free(self.rep_from)
        free(self.live)
        free(self.buf)
        free(self.link_delay)
        free(self.link_jitter)
        free(self.link_loss)
        free(self.lat)

    def __init__(self, dict timing, list links, list link_rngs, kpa, plan_scale, list node_order,
                 list initial_nodes, int n_users, int hard_limit, int max_replicas,
                 bint autoscaling, bint trace=False):
        """``links`` holds ``(delay_us, jitter_us, loss_prob)`` per link, access link first."""
        cdef int i
        self.duration_us = timing["duration_us"]
        self.timeout_us = timing["timeout_us"]
        self.service_us = timing["service_us"]
        self.cold_start_us = timing["cold_start_us"]
        self.ingress_us = timing["ingress_us"]
        self.tick_us = timing["tick_us"]
        self.now = 0
        self.seq = 0
        self.processed = 0
        self.autoscaling = autoscaling
        self.poke_pending = False
        self.tracing = trace
        self.hard_limit = hard_limit
        self.max_replicas = max_replicas
        self.n_users = n_users
        self.kpa = kpa
        self.plan_scale = plan_scale
        self.node_order = node_order
        self.pending_samples = {}
        self.next_sample_id = 0
        self.timeline = []
        self.trace = [] if trace else None

        self.n_links = len(links)
        self.link_delay = <int64_t*> malloc(self.n_links * sizeof(int64_t))
        self.link_jitter = <int64_t*> malloc(self.n_links * sizeof(int64_t))
        self.link_loss = <double*> malloc(self.n_links * sizeof(double))
        if self.link_delay == NULL or self.link_jitter == NULL or self.link_loss == NULL:
            raise MemoryError()
        for i in range(self.n_links):
            self.link_delay[i] = links[i][0]
            self.link_jitter[i] = links[i][1]
            self.link_loss[i] = links[i][2]
        self.link_rngs = link_rngs

        for node in initial_nodes:
            self._add_replica(node, READY)
        self.ready_count = len(initial_nodes)
        self.timeline.append((0, self.ready_count))

    # -- storage helpers ---------------------------------------------------

    cdef int _add_replica(self, int node, int state) except -1:
        cdef int rid = <int> self.rep_n
        cdef Py_ssize_t cap
        if self.rep_n + 1 > self.rep_cap:
            cap = self.rep_cap
            self.rep_node = <int32_t*> grow(self.rep_node, &cap, self.rep_n + 1, sizeof(int32_t))
            cap = self.rep_cap
            self.rep_state = <int32_t*> grow(self.rep_state, &cap, self.rep_n + 1, sizeof(int32_t))
            cap = self.rep_cap
            self.rep_in_flight = <int64_t*> grow(self.rep_in_flight, &cap, self.rep_n + 1, sizeof(int64_t))
            cap = self.rep_cap
            self.rep_assigned = <int64_t*> grow(self.rep_assigned, &cap, self.rep_n + 1, sizeof(int64_t))
            cap = self.rep_cap
            self.rep_area = <int64_t*> grow(self.rep_area, &cap, self.rep_n + 1, sizeof(int64_t))
            cap = self.rep_cap
            self.rep_changed = <int64_t*> grow(self.rep_changed, &cap, self.rep_n + 1, sizeof(int64_t))
            cap = self.rep_cap
            self.rep_from = <int64_t*> grow(self.rep_from, &cap, self.rep_n + 1, sizeof(int64_t))
            self.rep_cap = cap
        self.rep_node[rid] = node
        self.rep_state[rid] = state
        self.rep_in_flight[rid] = 0
        self.rep_assigned[rid] = 0
        self.rep_area[rid] = 0
        self.rep_changed[rid] = 0
        self.rep_from[rid] = 0
        self.rep_n += 1
        if self.live_n + 1 > self.live_cap:
            self.live = <int32_t*> grow(self.live, &self.live_cap, self.live_n + 1, sizeof(int32_t))
        self.live[self.live_n] = rid
        self.live_n += 1
        if state == PROVISIONING:
            self.prov_count += 1
        return rid

    cdef void _remove_replica(self, int rid):
        cdef Py_ssize_t i, j
        if self.rep_state[rid] == PROVISIONING:
            self.prov_count -= 1
        self.rep_state[rid] = REMOVED
        for i in range(self.live_n):
            if self.live[i] == rid:
                for j in range(i, self.live_n - 1):
                    self.live[j] = self.live[j + 1]
                self.live_n -= 1
                return

    cdef int _new_request(self, int user) except -1:
        cdef Py_ssize_t rid = self.req_n
        cdef Py_ssize_t cap
        if rid + 1 > self.req_cap:
            cap = self.req_cap
            self.req_issued = <int64_t*> grow(self.req_issued, &cap, rid + 1, sizeof(int64_t))
            cap = self.req_cap
            self.req_user = <int32_t*> grow(self.req_user, &cap, rid + 1, sizeof(int32_t))
            cap = self.req_cap
            self.req_served = <int32_t*> grow(self.req_served, &cap, rid + 1, sizeof(int32_t))
            cap = self.req_cap
            self.req_outcome = <int8_t*> grow(self.req_outcome, &cap, rid + 1, sizeof(int8_t))
            cap = self.req_cap
            self.req_lost = <int8_t*> grow(self.req_lost, &cap, rid + 1, sizeof(int8_t))
            self.req_cap = cap
        self.req_issued[rid] = self.now
        self.req_user[rid] = user
        self.req_served[rid] = -1
        self.req_outcome[rid] = O_PENDING
        self.req_lost[rid] = 0
        self.req_n += 1
        return <int> rid

    # -- queue ---------------------------------------------------------------

    cdef int64_t schedule(self, int64_t t, int kind, int64_t payload, int aux) except -1:
        cdef Ev ev
        cdef Py_ssize_t i, parent
        if t < self.now:
            raise RuntimeError(f"event kind {kind} at {t} is before now={self.now}")
        ev.t = t
        ev.seq = self.seq
        ev.payload = payload
        ev.kind = kind
        ev.aux = aux
        self.seq += 1
        if self.heap_n + 1 > self.heap_cap:
            self.heap = <Ev*> grow(self.heap, &self.heap_cap, self.heap_n + 1, sizeof(Ev))
        i = self.heap_n
        self.heap_n += 1
        while i > 0:
            parent = (i - 1) >> 1
            if ev_less(&ev, &self.heap[parent]):
                self.heap[i] = self.heap[parent]
                i = parent
            else:
                break
        self.heap[i] = ev
        return ev.seq

    cdef void _heap_pop(self, Ev* out):
        cdef Ev last
        cdef Py_ssize_t i = 0, child, n
        out[0] = self.heap[0]
        self.heap_n -= 1
        n = self.heap_n
        if n == 0:
            return
        last = self.heap[n]
        while True:
            child = 2 * i + 1
            if child >= n:
                break
            if child + 1 < n and ev_less(&self.heap[child + 1], &self.heap[child]):
                child += 1
            if ev_less(&self.heap[child], &last):
                self.heap[i] = self.heap[child]
                i = child
            else:
                break
        self.heap[i] = last

    cdef int schedule_timeout(self, int64_t rid) except -1:
        cdef Ev ev
        if self.lane_n + 1 > self.lane_cap:
            if self.lane_head > 0:
                memmove(self.lane, self.lane + self.lane_head,
                        (self.lane_n - self.lane_head) * sizeof(Ev))
                self.lane_n -= self.lane_head
                self.lane_head = 0
            if self.lane_n + 1 > self.lane_cap:
                self.lane = <Ev*> grow(self.lane, &self.lane_cap, self.lane_n + 1, sizeof(Ev))
        ev.t = self.now + self.timeout_us
        ev.seq = self.seq
        ev.payload = rid
        ev.kind = K_REQUEST_TIMEOUT
        ev.aux = 0
        self.seq += 1
        self.lane[self.lane_n] = ev
        self.lane_n += 1
        return 0

    # -- links ---------------------------------------------------------------

    cdef int64_t sample(self, int li) except -2:
        """Delay for one traversal of link ``li``, or -1 when the message is lost."""
        cdef double u
        cdef int64_t d, j, span
        if self.link_loss[li] > 0.0:
            u = self.link_rngs[li].random()
            if u < self.link_loss[li]:
                return -1
        j = self.link_jitter[li]
        if j == 0:
            return self.link_delay[li]
        span = 2 * j + 1
        u = self.link_rngs[li].random()
        d = self.link_delay[li] - j + <int64_t> (u * <double> span)
        return d if d > 0 else 0

    cdef bint send(self, int li, int64_t payload, int hop) except -1:
        cdef int64_t d = self.sample(li)
        if d < 0:
            return False
        self.schedule(self.now + d, K_MESSAGE_ARRIVAL, payload, hop)
        return True

    # -- run -----------------------------------------------------------------

    def start(self):
        cdef int uid
        for uid in range(self.n_users):
            self.schedule(0, K_USER_ISSUE, uid, 0)
        self.schedule(self.duration_us, K_RUN_END, 0, 0)
        if self.autoscaling:
            self.schedule(self.tick_us, K_AUTOSCALER_TICK, 0, TICK_PERIODIC)

    def run_until(self, int64_t t_end):
        cdef Ev ev
        cdef bint from_lane
        cdef int64_t count = 0
        if t_end < self.now:
            raise RuntimeError(f"run_until({t_end}) is before now={self.now}")
        while True:
            while self.lane_head < self.lane_n and \
                    self.req_outcome[self.lane[self.lane_head].payload] != O_PENDING:
                self.lane_head += 1
            if self.lane_head < self.lane_n:
                if self.heap_n > 0 and ev_less(&self.heap[0], &self.lane[self.lane_head]):
                    from_lane = False
                else:
                    from_lane = True
            elif self.heap_n > 0:
                from_lane = False
            else:
                break
            if from_lane:
                if self.lane[self.lane_head].t > t_end:
                    break
                ev = self.lane[self.lane_head]
                self.lane_head += 1
            else:
                if self.heap[0].t > t_end:
                    break
                self._heap_pop(&ev)
            self.now = ev.t
            count += 1
            if self.tracing:
                self.trace.append((ev.t, ev.kind, ev.payload))
            self.dispatch_event(ev.kind, ev.payload, ev.aux)
        self.now = t_end
        self.processed += count
        return count

    cdef int dispatch_event(self, int kind, int64_t payload, int aux) except -1:
        if kind == K_MESSAGE_ARRIVAL:
            self.on_message(payload, aux)
        elif kind == K_INGRESS_DONE:
            self.route(payload)
        elif kind == K_SERVICE_COMPLETE:
            self.on_service_complete(payload)
        elif kind == K_REQUEST_TIMEOUT:
            self.on_timeout(payload)
        elif kind == K_USER_ISSUE:
            self.issue(<int> payload)
        elif kind == K_REPLICA_READY:
            self.on_replica_ready(<int> payload)
        elif kind == K_AUTOSCALER_TICK:
            self.on_tick(aux)
        return 0

    # -- load generator --------------------------------------------------------

    cdef int issue(self, int uid) except -1:
        cdef int rid = self._new_request(uid)
        self.schedule_timeout(rid)
        if not self.send(0, rid, HOP_REQ_HEAD):
            self.req_lost[rid] = 1
        return 0

    cdef int user_done(self, int uid) except -1:
        if self.now < self.duration_us:
            self.issue(uid)
        return 0

    cdef int on_response(self, int64_t rid) except -1:
        cdef int64_t lat
        if self.req_outcome[rid] != O_PENDING:
            return 0
        self.req_outcome[rid] = O_SUCCESS
        self.successes += 1
        lat = self.now - self.req_issued[rid]
        if self.lat_n + 1 > self.lat_cap:
            self.lat = <int64_t*> grow(self.lat, &self.lat_cap, self.lat_n + 1, sizeof(int64_t))
        self.lat[self.lat_n] = lat
        self.lat_n += 1
        self.area += (self.now if self.now < self.duration_us else self.duration_us) - self.req_issued[rid]
        self.user_done(self.req_user[rid])
        return 0

    cdef int on_timeout(self, int64_t rid) except -1:
        if self.req_lost[rid]:
            self.req_outcome[rid] = O_DROPPED
            self.drops += 1
        else:
            self.req_outcome[rid] = O_TIMEOUT
            self.timeouts += 1
        self.area += (self.now if self.now < self.duration_us else self.duration_us) - self.req_issued[rid]
        self.user_done(self.req_user[rid])
        return 0

    # -- data plane ------------------------------------------------------------

    cdef int on_message(self, int64_t ident, int hop) except -1:
        cdef int rep
        if hop == HOP_REQ_HEAD:
            self.ingress(ident)
        elif hop == HOP_REQ_WORKER:
            self.serve(ident, self.req_served[ident])
        elif hop == HOP_RESP_HEAD:
            if not self.send(0, ident, HOP_RESP_TESTER):
                self.req_lost[ident] = 1
        elif hop == HOP_RESP_TESTER:
            self.on_response(ident)
        elif hop == HOP_SAMPLE:
            measured_at, replica, conc = self.pending_samples.pop(ident)
            self.kpa.record(measured_at, self.now, replica, conc)
        return 0

    cdef int ingress(self, int64_t rid) except -1:
        cdef int64_t done
        self.backlog += 1
        if self.ingress_us == 0:
            self.route(rid)
            return 0
        done = (self.now if self.now > self.ingress_free_at else self.ingress_free_at) + self.ingress_us
        self.ingress_free_at = done
        self.schedule(done, K_INGRESS_DONE, rid, 0)
        return 0

    cdef int select_replica(self):
        cdef Py_ssize_t i
        cdef int rid, best = -1
        cdef int64_t bf = 0
        cdef int bn = 0
        for i in range(self.live_n):
            rid = self.live[i]
            if self.rep_state[rid] != READY:
                continue
            if self.hard_limit > 0 and self.rep_assigned[rid] >= self.hard_limit:
                continue
            if best < 0 or self.rep_in_flight[rid] < bf or \
                    (self.rep_in_flight[rid] == bf and (self.rep_node[rid] < bn or
                                                        (self.rep_node[rid] == bn and rid < best))):
                best = rid
                bf = self.rep_in_flight[rid]
                bn = self.rep_node[rid]
        return best

    cdef int buf_push(self, int64_t rid) except -1:
        if self.buf_n + 1 > self.buf_cap:
            if self.buf_head > 0:
                memmove(self.buf, self.buf + self.buf_head, (self.buf_n - self.buf_head) * sizeof(int64_t))
                self.buf_n -= self.buf_head
                self.buf_head = 0
            if self.buf_n + 1 > self.buf_cap:
                self.buf = <int64_t*> grow(self.buf, &self.buf_cap, self.buf_n + 1, sizeof(int64_t))
        self.buf[self.buf_n] = rid
        self.buf_n += 1
        return 0

    cdef int route(self, int64_t rid) except -1:
        cdef int rep
        if self.buf_head < self.buf_n:
            self.buf_push(rid)
            return 0
        rep = self.select_replica()
        if rep < 0:
            self.buf_push(rid)
            if (self.autoscaling and not self.poke_pending and self.ready_count == 0
                    and self.prov_count == 0):
                self.poke_pending = True
                self.schedule(self.now, K_AUTOSCALER_TICK, 0, TICK_POKE)
            return 0
        self.dispatch(rid, rep)
        return 0

    cdef int dispatch(self, int64_t rid, int rep) except -1:
        cdef int node = self.rep_node[rep]
        self.backlog -= 1
        self.rep_assigned[rep] += 1
        self.req_served[rid] = rep
        if node == HEADNODE:
            self.serve(rid, rep)
        elif not self.send(node, rid, HOP_REQ_WORKER):
            self.req_lost[rid] = 1
            self.release(rep)
        return 0

    cdef inline void shift(self, int rep, int delta):
        self.rep_area[rep] += self.rep_in_flight[rep] * (self.now - self.rep_changed[rep])
        self.rep_changed[rep] = self.now
        self.rep_in_flight[rep] += delta

    cdef double take_sample(self, int rep):
        cdef int64_t span
        cdef double value
        self.shift(rep, 0)
        span = self.now - self.rep_from[rep]
        if span > 0:
            value = <double> self.rep_area[rep] / <double> span
        else:
            value = <double> self.rep_in_flight[rep]
        self.rep_area[rep] = 0
        self.rep_from[rep] = self.now
        return value

    cdef int serve(self, int64_t rid, int rep) except -1:
        self.shift(rep, 1)
        self.schedule(self.now + self.service_us, K_SERVICE_COMPLETE, rid, 0)
        return 0

    cdef int on_service_complete(self, int64_t rid) except -1:
        cdef int rep = self.req_served[rid]
        cdef int node = self.rep_node[rep]
        cdef bint ok
        self.shift(rep, -1)
        self.release(rep)
        if node == HEADNODE:
            ok = self.send(0, rid, HOP_RESP_TESTER)
        else:
            ok = self.send(node, rid, HOP_RESP_HEAD)
        if not ok:
            self.req_lost[rid] = 1
        if self.buf_head < self.buf_n:
            self.drain_buffer()
        return 0

    cdef int release(self, int rep) except -1:
        self.rep_assigned[rep] -= 1
        if self.rep_state[rep] == TERMINATING and self.rep_assigned[rep] == 0:
            self._remove_replica(rep)
        return 0

    cdef int drain_buffer(self) except -1:
        cdef int rep
        cdef int64_t rid
        while self.buf_head < self.buf_n:
            rep = self.select_replica()
            if rep < 0:
                return 0
            rid = self.buf[self.buf_head]
            self.buf_head += 1
            self.dispatch(rid, rep)
        return 0

    cdef int on_replica_ready(self, int rep) except -1:
        if rep >= self.rep_n or self.rep_state[rep] != PROVISIONING:
            return 0
        self.rep_state[rep] = READY
        self.rep_changed[rep] = self.now
        self.rep_from[rep] = self.now
        self.prov_count -= 1
        self.ready_count += 1
        self.timeline.append((self.now, self.ready_count))
        self.drain_buffer()
        return 0

    # -- control plane glue ----------------------------------------------------

    cdef int on_tick(self, int kind) except -1:
        cdef Py_ssize_t i
        cdef int rep, n_ready = 0, current, desired
        cdef int64_t now = self.now
        cdef int64_t sid
        cdef double conc
        if kind == TICK_POKE:
            self.poke_pending = False
        for i in range(self.live_n):
            rep = self.live[i]
            if self.rep_state[rep] != READY:
                continue
            n_ready += 1
            conc = self.take_sample(rep)
            if self.rep_node[rep] == HEADNODE:
                self.kpa.record(now, now, rep, conc)
            else:
                sid = self.next_sample_id
                self.next_sample_id += 1
                self.pending_samples[sid] = (now, rep, conc)
                if not self.send(self.rep_node[rep], sid, HOP_SAMPLE):
                    del self.pending_samples[sid]
        self.kpa.record(now, now, ACTIVATOR, self.backlog if n_ready == 0 else 0)
        current = n_ready + self.prov_count
        desired = self.kpa.decide(now, n_ready, current)
        if desired != current:
            self.apply_scale(desired)
        if kind == TICK_PERIODIC:
            self.schedule(now + self.tick_us, K_AUTOSCALER_TICK, 0, TICK_PERIODIC)
        return 0

    cdef int apply_scale(self, int desired) except -1:
        cdef Py_ssize_t i
        cdef int rep
        cdef bint was_ready
        snapshot = []
        for i in range(self.live_n):
            rep = self.live[i]
            snapshot.append((rep, self.rep_node[rep], self.rep_state[rep], self.rep_in_flight[rep]))
        new_nodes, victims = self.plan_scale(desired, snapshot, self.node_order, self.max_replicas)
        for node in new_nodes:
            rep = self._add_replica(node, PROVISIONING)
            self.schedule(self.now + self.cold_start_us, K_REPLICA_READY, rep, 0)
        for victim in victims:
            rep = victim
            was_ready = self.rep_state[rep] == READY
            if self.rep_state[rep] == PROVISIONING:
                self.prov_count -= 1
            self.rep_state[rep] = TERMINATING
            if self.rep_assigned[rep] == 0:
                self._remove_replica(rep)
            if was_ready:
                self.ready_count -= 1
                self.timeline.append((self.now, self.ready_count))
        return 0

    # -- results ---------------------------------------------------------------

    def counters(self):
        return {
            "successes": self.successes,
            "timeouts": self.timeouts,
            "drops": self.drops,
            "issued": self.req_n,
            "inflight_area_us": self.area,
            "events": self.processed,
        }

    def latencies(self):
        cdef Py_ssize_t i
        return [self.lat[i] for i in range(self.lat_n)]
