//! Scope-restricted FIFO frontier with per-domain politeness.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::time::{Duration, Instant};

use url::Url;

use crate::domain::{normalize_url, url_digest, url_domain};

/// Registrable domains a crawl may touch. Fixed once built from the seeds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainScope {
    allowed: BTreeSet<String>,
}

#[derive(Debug, thiserror::Error)]
#[error("seeds without a usable host: {}", .0.join(", "))]
pub struct ScopeError(pub Vec<String>);

impl DomainScope {
    pub fn allowed(&self) -> &BTreeSet<String> {
        &self.allowed
    }

    pub fn len(&self) -> usize {
        self.allowed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.allowed.is_empty()
    }

    pub fn contains(&self, url: &Url) -> bool {
        url_domain(url).is_some_and(|d| self.allowed.contains(&d))
    }
}

/// Registrable domains of all seed hosts.
pub fn scope_of<S: AsRef<str>>(seeds: &[S]) -> Result<DomainScope, ScopeError> {
    let mut allowed = BTreeSet::new();
    let mut bad = Vec::new();
    for seed in seeds {
        let seed = seed.as_ref();
        match Url::parse(seed).ok().and_then(|u| url_domain(&u)) {
            Some(d) => {
                allowed.insert(d);
            }
            None => bad.push(seed.to_string()),
        }
    }
    if !bad.is_empty() {
        return Err(ScopeError(bad));
    }
    if allowed.is_empty() {
        return Err(ScopeError(vec!["<no seeds>".into()]));
    }
    Ok(DomainScope { allowed })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EnqueueOutcome {
    pub admitted: usize,
    pub out_of_scope: usize,
    pub duplicate: usize,
}

impl std::ops::AddAssign for EnqueueOutcome {
    fn add_assign(&mut self, rhs: Self) {
        self.admitted += rhs.admitted;
        self.out_of_scope += rhs.out_of_scope;
        self.duplicate += rhs.duplicate;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dispatch {
    pub domain: String,
    pub at: Instant,
    pub url: Url,
}

#[derive(Debug)]
struct DomainState {
    last_request: Option<Instant>,
    min_delay: Duration,
    queue: VecDeque<(u64, Url)>,
}

/// Pending URLs (grouped per domain, ordered globally by enqueue sequence),
/// the lifetime seen-set, and per-domain politeness state.
#[derive(Debug)]
pub struct Frontier {
    default_delay: Duration,
    seq: u64,
    pending: usize,
    seen: HashSet<[u8; 16]>,
    domains: HashMap<String, DomainState>,
    log: Option<Vec<Dispatch>>,
}

impl Frontier {
    pub fn new(min_delay: Duration) -> Self {
        Frontier {
            default_delay: min_delay,
            seq: 0,
            pending: 0,
            seen: HashSet::new(),
            domains: HashMap::new(),
            log: None,
        }
    }

    /// Keeps every dispatch decision for later inspection.
    pub fn with_decision_log(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    pub fn decision_log(&self) -> &[Dispatch] {
        self.log.as_deref().unwrap_or(&[])
    }

    pub fn take_decision_log(&mut self) -> Vec<Dispatch> {
        self.log.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn pending(&self) -> usize {
        self.pending
    }

    pub fn is_empty(&self) -> bool {
        self.pending == 0
    }

    pub fn seen_count(&self) -> usize {
        self.seen.len()
    }

    /// Marks URLs as already processed without queueing them.
    pub fn mark_seen(&mut self, url: &Url) -> bool {
        self.seen.insert(url_digest(url))
    }

    pub fn is_seen(&self, url: &Url) -> bool {
        self.seen.contains(&url_digest(url))
    }

    fn state(&mut self, domain: &str) -> &mut DomainState {
        let delay = self.default_delay;
        self.domains
            .entry(domain.to_string())
            .or_insert_with(|| DomainState {
                last_request: None,
                min_delay: delay,
                queue: VecDeque::new(),
            })
    }

    /// Raises (never lowers) a domain's minimum delay, e.g. from robots.txt.
    pub fn raise_min_delay(&mut self, domain: &str, delay: Duration) {
        let st = self.state(domain);
        st.min_delay = st.min_delay.max(delay);
    }

    pub fn min_delay(&self, domain: &str) -> Duration {
        self.domains
            .get(domain)
            .map_or(self.default_delay, |s| s.min_delay)
    }

    /// Admits in-scope, never-seen URLs in order.
    pub fn enqueue<'a, I>(&mut self, urls: I, scope: &DomainScope) -> EnqueueOutcome
    where
        I: IntoIterator<Item = &'a Url>,
    {
        let mut out = EnqueueOutcome::default();
        for url in urls {
            let Some(url) = normalize_url(url) else {
                out.out_of_scope += 1;
                continue;
            };
            let Some(domain) = url_domain(&url).filter(|d| scope.allowed.contains(d)) else {
                out.out_of_scope += 1;
                continue;
            };
            if !self.seen.insert(url_digest(&url)) {
                out.duplicate += 1;
                continue;
            }
            let seq = self.seq;
            self.seq += 1;
            self.state(&domain).queue.push_back((seq, url));
            self.pending += 1;
            out.admitted += 1;
        }
        out
    }

    /// Puts a dispatched URL back at the head of its domain queue without
    /// touching the seen-set.
    pub fn requeue_front(&mut self, url: Url) {
        if let Some(domain) = url_domain(&url) {
            let st = self.state(&domain);
            let seq = st.queue.front().map_or(0, |(s, _)| s.saturating_sub(1));
            st.queue.push_front((seq, url));
            self.pending += 1;
        }
    }

    /// Drops pending URLs for which `keep` returns false. They stay seen.
    pub fn retain_pending(&mut self, mut keep: impl FnMut(&Url) -> bool) {
        let mut removed = 0;
        for st in self.domains.values_mut() {
            let before = st.queue.len();
            st.queue.retain(|(_, u)| keep(u));
            removed += before - st.queue.len();
        }
        self.pending -= removed;
    }

    fn ready(st: &DomainState, now: Instant) -> bool {
        match st.last_request {
            None => true,
            Some(last) => now.checked_duration_since(last).is_some_and(|d| d >= st.min_delay),
        }
    }

    /// Earliest-enqueued URL whose domain is idle for at least its minimum
    /// delay. The domain's last request time becomes `now`.
    pub fn next_fetchable(&mut self, now: Instant) -> Option<Url> {
        self.next_fetchable_where(now, |_| true).0
    }

    /// As [`Frontier::next_fetchable`], but URLs failing `admit` are dropped
    /// on the way without spending the domain's delay or entering the
    /// decision log. Returns the dispatched URL and the number dropped.
    pub fn next_fetchable_where(&mut self, now: Instant, mut admit: impl FnMut(&Url) -> bool) -> (Option<Url>, usize) {
        let mut dropped = 0;
        loop {
            let Some(domain) = self
                .domains
                .iter()
                .filter(|(_, st)| Self::ready(st, now))
                .filter_map(|(d, st)| st.queue.front().map(|(seq, _)| (d, *seq)))
                .min_by_key(|(_, seq)| *seq)
                .map(|(d, _)| d.clone())
            else {
                return (None, dropped);
            };
            let st = self.domains.get_mut(&domain).expect("domain just found");
            let (_, url) = st.queue.pop_front().expect("non-empty queue");
            self.pending -= 1;
            if !admit(&url) {
                dropped += 1;
                continue;
            }
            st.last_request = Some(now);
            if let Some(log) = &mut self.log {
                log.push(Dispatch {
                    domain,
                    at: now,
                    url: url.clone(),
                });
            }
            return (Some(url), dropped);
        }
    }

    /// When the next pending URL becomes dispatchable, if any is pending.
    pub fn next_ready_at(&self) -> Option<Instant> {
        self.domains
            .values()
            .filter(|st| !st.queue.is_empty())
            .map(|st| st.last_request.map(|last| last + st.min_delay))
            .min_by(|a, b| match (a, b) {
                (None, _) => std::cmp::Ordering::Less,
                (_, None) => std::cmp::Ordering::Greater,
                (Some(a), Some(b)) => a.cmp(b),
            })
            .map(|t| t.unwrap_or_else(Instant::now))
    }
}

/// Pairs of consecutive same-domain dispatches closer than `min_delay`.
pub fn politeness_violations(log: &[Dispatch], min_delay: Duration) -> Vec<(Dispatch, Dispatch)> {
    let mut last: HashMap<&str, &Dispatch> = HashMap::new();
    let mut bad = Vec::new();
    for d in log {
        if let Some(prev) = last.get(d.domain.as_str()) {
            if d.at.saturating_duration_since(prev.at) < min_delay {
                bad.push(((*prev).clone(), d.clone()));
            }
        }
        last.insert(&d.domain, d);
    }
    bad
}
