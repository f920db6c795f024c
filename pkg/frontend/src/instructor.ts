/**
 * Instructor dashboard: live event feed via the since_seq cursor, per-
 * challenge solve/wrong/hint counters, an incident panel with severity
 * badges and evidence drill-down, and a backup-hint form. All mutations go
 * through the API; the dashboard holds no state the server doesn't.
 */

import { ApiClient, ApiError, type GameEventRecord, type Incident } from './api.js';
import { EventCursor, startPolling, type Poller } from './poll.js';
import {
  evidenceEvents,
  foldCounters,
  incidentPanel,
  type ChallengeCounters,
} from './state.js';

const POLL_MS = 4000;

export class InstructorDashboard {
  private readonly feed: GameEventRecord[] = [];
  private counters = new Map<string, ChallengeCounters>();
  private cursor: EventCursor;
  private pollers: Poller[] = [];

  constructor(
    private readonly api: ApiClient,
    private readonly root: HTMLElement,
  ) {
    this.cursor = new EventCursor((since) => this.api.eventFeed(since));
  }

  async start(): Promise<void> {
    try {
      const info = await this.api.login();
      if (info.role !== 'instructor') {
        this.root.innerHTML = '<p>Access denied: instructor token required.</p>';
        return;
      }
      this.renderShell(info.game.title);
    } catch (err) {
      if (err instanceof ApiError && (err.status === 401 || err.status === 403)) {
        this.root.innerHTML = '<p>Access denied: instructor token required.</p>';
        return;
      }
      throw err;
    }
    // two independent coalesced feeds: raw events and the incident report
    this.pollers = [
      startPolling(() => this.pollEvents(), POLL_MS),
      startPolling(() => this.pollIncidents(), POLL_MS),
    ];
  }

  stop(): void {
    for (const p of this.pollers) p.stop();
  }

  private async pollEvents(): Promise<void> {
    await this.cursor.advance<GameEventRecord>((fresh) => {
      this.feed.push(...fresh);
      this.counters = foldCounters(fresh, this.counters);
      this.renderCounters();
      this.renderFeedTail();
    });
  }

  private async pollIncidents(): Promise<void> {
    const report = await this.api.incidentReport();
    this.renderIncidents(report.incidents);
  }

  private renderCounters(): void {
    const rows = [...this.counters.entries()]
      .sort(([a], [b]) => (a < b ? -1 : 1))
      .map(
        ([challenge, c]) =>
          `<tr><td>${challenge}</td><td>${c.solves}</td>` +
          `<td>${c.wrongs}</td><td>${c.hintDisplays}</td></tr>`,
      );
    this.section('counters').innerHTML =
      `<table><tr><th>Challenge</th><th>Solves</th><th>Wrong</th><th>Hints</th></tr>` +
      rows.join('') +
      '</table>';
  }

  private renderFeedTail(): void {
    const tail = this.feed.slice(-30).reverse();
    this.section('feed').innerHTML = tail
      .map((e) => `<div class="event">${e.at} · ${e.player} · ${e.kind}</div>`)
      .join('');
  }

  private renderIncidents(incidents: Incident[]): void {
    const panel = this.section('incidents');
    panel.replaceChildren();
    for (const row of incidentPanel(incidents)) {
      const item = document.createElement('details');
      const summary = document.createElement('summary');
      const badge = document.createElement('span');
      badge.className = `badge ${row.badge.toLowerCase()}`;
      badge.textContent = row.badge;
      summary.append(badge, ` ${row.headline}`);
      item.appendChild(summary);

      const evidence = document.createElement('pre');
      evidence.textContent = JSON.stringify(row.incident.evidence, null, 2);
      item.appendChild(evidence);

      for (const raw of evidenceEvents(row.incident, this.feed)) {
        const line = document.createElement('code');
        line.textContent = JSON.stringify(raw);
        item.appendChild(line);
      }
      panel.appendChild(item);
    }
  }

  private renderShell(title: string): void {
    this.root.innerHTML = `
      <header><h1>${title} — instructor</h1></header>
      <section><h2>Incidents</h2><div id="incidents"></div></section>
      <section><h2>Challenges</h2><div id="counters"></div></section>
      <section><h2>Backup hint</h2><div id="hint-form"></div></section>
      <section><h2>Live feed</h2><div id="feed"></div></section>`;
    this.renderHintForm();
  }

  private renderHintForm(): void {
    const form = this.section('hint-form');
    const challenge = document.createElement('input');
    challenge.placeholder = 'challenge id';
    const hintId = document.createElement('input');
    hintId.placeholder = 'hint id';
    const topic = document.createElement('input');
    topic.placeholder = 'topic label';
    const body = document.createElement('textarea');
    body.placeholder = 'hint text';
    const cost = document.createElement('input');
    cost.type = 'number';
    cost.value = '0';
    const submit = document.createElement('button');
    submit.textContent = 'Release hint';
    submit.onclick = async () => {
      await this.api.addHint(challenge.value, {
        hint_id: hintId.value,
        topic_label: topic.value,
        body: body.value,
        cost: parseInt(cost.value, 10) || 0,
      });
      submit.textContent = 'Released ✓';
    };
    form.append(challenge, hintId, topic, body, cost, submit);
  }

  private section(id: string): HTMLElement {
    return this.root.querySelector(`#${id}`)!;
  }
}
