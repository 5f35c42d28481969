/**
 * Blinded preference-voting client.
 *
 * One annotator per browser session. The server owns the blinding: each
 * task arrives with candidates under shuffled labels A..E and the client
 * renders them in exactly that order. Step identities never reach the DOM.
 *
 * Keyboard: 1-5 toggle the corresponding card, Enter submits. Every
 * advance waits for the server's 201; there is no optimistic state.
 */

export interface Candidate {
  label: string;
  summary: string;
}

export interface Task {
  article_id: string;
  article: string;
  candidates: Candidate[];
  guidelines: string;
  progress: { completed: number; total: number };
}

export interface VoteResult {
  status: string;
  completed: number;
  total: number;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class AnnotationApi {
  constructor(private baseUrl: string, private fetchImpl: FetchLike) {}

  /** Next task for the annotator, or null when the queue is done (204). */
  async nextTask(annotator: string): Promise<Task | null> {
    const resp = await this.fetchImpl(
      `${this.baseUrl}/api/task?annotator=${encodeURIComponent(annotator)}`,
    );
    if (resp.status === 204) return null;
    if (!resp.ok) {
      throw new ApiError(resp.status, await errorText(resp));
    }
    return (await resp.json()) as Task;
  }

  async vote(
    annotator: string,
    articleId: string,
    chosenLabels: string[],
  ): Promise<VoteResult> {
    const resp = await this.fetchImpl(`${this.baseUrl}/api/vote`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({
        annotator,
        article_id: articleId,
        chosen_labels: chosenLabels,
      }),
    });
    if (resp.status !== 201) {
      throw new ApiError(resp.status, await errorText(resp));
    }
    return (await resp.json()) as VoteResult;
  }

  async ballotCount(): Promise<number> {
    const resp = await this.fetchImpl(`${this.baseUrl}/api/progress`);
    if (!resp.ok) throw new ApiError(resp.status, await errorText(resp));
    const body = (await resp.json()) as { ballots: number };
    return body.ballots;
  }
}

async function errorText(resp: Response): Promise<string> {
  try {
    const body = (await resp.json()) as { error?: string };
    return body.error ?? `HTTP ${resp.status}`;
  } catch {
    return `HTTP ${resp.status}`;
  }
}

interface AppState {
  task: Task | null;
  selected: Set<string>;
  busy: boolean;
  done: boolean;
  ballots: number;
}

export class App {
  private state: AppState = {
    task: null,
    selected: new Set(),
    busy: false,
    done: false,
    ballots: 0,
  };

  private api: AnnotationApi;

  constructor(
    private root: HTMLElement,
    private annotator: string,
    fetchImpl: FetchLike,
    baseUrl = '',
  ) {
    this.api = new AnnotationApi(baseUrl, fetchImpl);
    this.onKeyDown = this.onKeyDown.bind(this);
  }

  async start(): Promise<void> {
    document.addEventListener('keydown', this.onKeyDown);
    await this.loadNext();
  }

  stop(): void {
    document.removeEventListener('keydown', this.onKeyDown);
  }

  /** Current progress counter value as rendered. */
  get completedCount(): number {
    return this.state.task?.progress.completed ?? this.state.ballots;
  }

  private async loadNext(): Promise<void> {
    this.state.busy = true;
    try {
      const task = await this.api.nextTask(this.annotator);
      this.state.busy = false;
      if (task === null) {
        this.state.done = true;
        this.state.task = null;
        this.state.ballots = await this.api.ballotCount().catch(() => this.state.ballots);
        this.render();
        return;
      }
      this.state.task = task;
      this.state.selected = new Set();
      this.render();
    } catch (err) {
      this.state.busy = false;
      this.renderRetry(err instanceof Error ? err.message : String(err));
    }
  }

  toggle(label: string): void {
    if (!this.state.task || this.state.busy) return;
    if (this.state.selected.has(label)) {
      this.state.selected.delete(label);
    } else {
      this.state.selected.add(label);
    }
    this.render();
  }

  async submit(): Promise<void> {
    const task = this.state.task;
    if (!task || this.state.busy) return;
    if (this.state.selected.size === 0) {
      this.setNotice('Select at least one summary before submitting.');
      return;
    }
    this.state.busy = true;
    const labels = [...this.state.selected].sort();
    try {
      await this.api.vote(this.annotator, task.article_id, labels);
      this.state.busy = false;
      await this.loadNext();
    } catch (err) {
      this.state.busy = false;
      if (err instanceof ApiError) {
        // 409/422: surface inline, stay on the current task
        this.setNotice(err.message);
      } else {
        this.renderRetry(err instanceof Error ? err.message : String(err));
      }
    }
  }

  private onKeyDown(ev: KeyboardEvent): void {
    const task = this.state.task;
    if (!task) return;
    if (ev.key >= '1' && ev.key <= '9') {
      const idx = Number(ev.key) - 1;
      if (idx < task.candidates.length) this.toggle(task.candidates[idx].label);
    } else if (ev.key === 'Enter') {
      void this.submit();
    }
  }

  private setNotice(message: string): void {
    const notice = this.root.querySelector('.notice');
    if (notice) notice.textContent = message;
  }

  private renderRetry(message: string): void {
    // retry banner keeps selections: only the banner area re-renders
    let banner = this.root.querySelector('.retry-banner') as HTMLElement | null;
    if (!banner) {
      banner = document.createElement('div');
      banner.className = 'retry-banner';
      this.root.prepend(banner);
    }
    banner.textContent = '';
    const text = document.createElement('span');
    text.textContent = `Connection problem: ${message} `;
    const button = document.createElement('button');
    button.textContent = 'Retry';
    button.addEventListener('click', () => {
      banner?.remove();
      if (this.state.task) {
        void this.submit();
      } else {
        void this.loadNext();
      }
    });
    banner.append(text, button);
  }

  private render(): void {
    this.root.textContent = '';
    if (this.state.done) {
      const doneEl = document.createElement('div');
      doneEl.className = 'all-done';
      const h = document.createElement('h1');
      h.textContent = 'All done';
      const p = document.createElement('p');
      p.textContent = `Thank you. ${this.state.ballots} ballots recorded in total.`;
      doneEl.append(h, p);
      this.root.append(doneEl);
      return;
    }
    const task = this.state.task;
    if (!task) return;

    const header = document.createElement('header');
    const progress = document.createElement('span');
    progress.className = 'progress';
    progress.textContent = `${task.progress.completed} / ${task.progress.total}`;
    const guide = document.createElement('p');
    guide.className = 'guidelines';
    guide.textContent = task.guidelines;
    header.append(progress, guide);

    const panes = document.createElement('main');
    panes.className = 'panes';

    const articlePane = document.createElement('article');
    articlePane.className = 'article-pane';
    articlePane.textContent = task.article;

    const cardsPane = document.createElement('section');
    cardsPane.className = 'cards-pane';
    task.candidates.forEach((cand, i) => {
      const card = document.createElement('div');
      card.className = 'card';
      card.dataset.label = cand.label;
      if (this.state.selected.has(cand.label)) card.classList.add('selected');
      const title = document.createElement('h2');
      title.textContent = `${cand.label} (press ${i + 1})`;
      const body = document.createElement('p');
      body.textContent = cand.summary;
      card.append(title, body);
      card.addEventListener('click', () => this.toggle(cand.label));
      cardsPane.append(card);
    });
    panes.append(articlePane, cardsPane);

    const footer = document.createElement('footer');
    const notice = document.createElement('span');
    notice.className = 'notice';
    const submitBtn = document.createElement('button');
    submitBtn.className = 'submit';
    submitBtn.textContent = 'Submit (Enter)';
    submitBtn.disabled = this.state.selected.size === 0;
    submitBtn.addEventListener('click', () => void this.submit());
    footer.append(notice, submitBtn);

    this.root.append(header, panes, footer);
  }
}

/** Wire the app into the served page. Annotator comes from ?annotator=. */
export function boot(): void {
  const root = document.getElementById('app');
  if (!root) return;
  const annotator = new URLSearchParams(window.location.search).get('annotator');
  if (!annotator) {
    root.textContent = 'Add ?annotator=yourname to the URL to begin.';
    return;
  }
  const app = new App(root, annotator, (input, init) => fetch(input, init));
  void app.start();
}

declare const process: { env?: Record<string, string | undefined> } | undefined;

if (typeof window !== 'undefined' && typeof process === 'undefined') {
  boot();
}
