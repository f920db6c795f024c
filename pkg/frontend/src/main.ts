/**
 * Entry point: picks a face from the URL (#instructor for the dashboard)
 * and a token from localStorage, prompting once if absent.
 */

import { ApiClient } from './api.js';
import { InstructorDashboard } from './instructor.js';
import { PlayerBoard } from './player.js';

const root = document.getElementById('app')!;
let token = localStorage.getItem('ctfkit-token');
if (!token) {
  token = window.prompt('Access token:') ?? '';
  localStorage.setItem('ctfkit-token', token);
}

const api = new ApiClient('', token);
if (window.location.hash === '#instructor') {
  void new InstructorDashboard(api, root).start();
} else {
  void new PlayerBoard(api, root).start();
}
